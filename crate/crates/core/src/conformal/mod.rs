//! Conformal prediction on top of the forest posteriors.
//!
//! The inductive label-conditional variant is the production path: the forest is
//! trained once, calibration scores are stored per class, and each test instance
//! costs one forest evaluation plus two binary searches. The transductive variants
//! retrain for every hypothesis and only serve as small-scale reference
//! implementations.

mod inductive;
mod pipeline;
mod transductive;

pub use inductive::{
    icp_pvalue, lcmicp_pvalue, CalibrationScores, Denominator, LabelConditional, MondrianScores,
    MondrianTaxonomy, SortedScores,
};
pub use pipeline::{rf_lcmicp_pipeline, ConformalConfig, Prediction, RfLcmicp, TestOutcome};
pub use transductive::{
    lcmcp_pvalue, tcp_pvalue, ExchangeableScorer, ForestScorer, NearestNeighbourScorer,
};

use serde::{Deserialize, Serialize};

use crate::data::{BinaryLabel, PerClass};
use crate::forest::Posterior;
use crate::scalar::Scalar;

/// `1 - P(label | x)`: how poorly the forest supports `label`.
pub fn nonconformity<T: Scalar>(posterior: &Posterior<T>, label: BinaryLabel) -> T {
    T::one() - posterior[label]
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CpVariant {
    Transductive,
    LabelConditionalTransductive,
    Inductive,
    LabelConditionalInductive,
}

/// One p-value per class, tagged with the variant that produced them.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PValues<T> {
    pub per_class: PerClass<T>,
    pub variant: CpVariant,
}

impl<T: Scalar> PValues<T> {
    pub fn new(benign: T, malicious: T, variant: CpVariant) -> Self {
        PValues {
            per_class: PerClass::new(benign, malicious),
            variant,
        }
    }

    pub fn get(&self, label: BinaryLabel) -> T {
        self.per_class[label]
    }
}

/// Which class wins when both p-values are equal.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TieRule {
    #[default]
    Benign,
    Malicious,
}

impl TieRule {
    pub fn label(self) -> BinaryLabel {
        match self {
            TieRule::Benign => BinaryLabel::Benign,
            TieRule::Malicious => BinaryLabel::Malicious,
        }
    }
}

/// Labels whose p-value exceeds their significance level.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PredictionSet<T> {
    pub members: PerClass<bool>,
    pub significance: PerClass<T>,
}

impl<T: Scalar> PredictionSet<T> {
    pub fn contains(&self, label: BinaryLabel) -> bool {
        self.members[label]
    }

    pub fn len(&self) -> usize {
        self.members.benign as usize + self.members.malicious as usize
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn labels(&self) -> Vec<BinaryLabel> {
        BinaryLabel::ALL
            .into_iter()
            .filter(|&l| self.members[l])
            .collect()
    }

    pub fn is_subset_of(&self, other: &PredictionSet<T>) -> bool {
        BinaryLabel::ALL
            .iter()
            .all(|&l| !self.members[l] || other.members[l])
    }
}

/// `{ Y : p(Y) > delta_Y }`. A uniform level is `PerClass::new(d, d)`.
pub fn prediction_set<T: Scalar>(p: &PValues<T>, delta: PerClass<T>) -> PredictionSet<T> {
    PredictionSet {
        members: PerClass::from_fn(|l| p.get(l) > delta[l]),
        significance: delta,
    }
}

pub fn uniform<T: Copy>(delta: T) -> PerClass<T> {
    PerClass::new(delta, delta)
}

/// Single-label output with its confidence and credibility.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ForcedPrediction<T> {
    pub label: BinaryLabel,
    /// One minus the second largest p-value.
    pub confidence: T,
    /// The largest p-value.
    pub credibility: T,
}

pub fn forced_prediction<T: Scalar>(p: &PValues<T>, tie: TieRule) -> ForcedPrediction<T> {
    let (b, m) = (p.get(BinaryLabel::Benign), p.get(BinaryLabel::Malicious));
    let label = if b > m {
        BinaryLabel::Benign
    } else if m > b {
        BinaryLabel::Malicious
    } else {
        tie.label()
    };
    let top = p.get(label);
    let second = p.get(label.other());
    ForcedPrediction {
        label,
        confidence: T::one() - second,
        credibility: top,
    }
}
