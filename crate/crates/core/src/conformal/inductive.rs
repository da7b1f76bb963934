use std::collections::BTreeMap;
use std::fmt::Debug;

use serde::{Deserialize, Serialize};

use crate::data::{BinaryLabel, PerClass};
use crate::error::{Error, Result};
use crate::scalar::{ratio, Scalar};

/// Nonconformity scores kept in ascending order.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SortedScores<T>(Vec<T>);

impl<T: Scalar> SortedScores<T> {
    pub fn new(mut scores: Vec<T>) -> Result<Self> {
        if scores.iter().any(|s| s.is_nan()) {
            return Err(Error::InvalidParameter("NaN nonconformity score".into()));
        }
        scores.sort_unstable_by(|a, b| a.partial_cmp(b).expect("no NaN"));
        Ok(SortedScores(scores))
    }

    pub fn as_slice(&self) -> &[T] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn is_sorted(&self) -> bool {
        self.0.windows(2).all(|w| w[0] <= w[1])
    }

    /// Number of scores `>= score`.
    pub fn count_at_least(&self, score: T) -> usize {
        self.0.len() - self.0.partition_point(|&a| a < score)
    }
}

/// Pooled inductive p-value: `(#{i : a_i >= a} + 1) / (q + 1)`.
pub fn icp_pvalue<T: Scalar>(calibration: &SortedScores<T>, test_score: T) -> T {
    ratio(
        calibration.count_at_least(test_score) + 1,
        calibration.len() + 1,
    )
}

/// Denominator of the label-conditional inductive p-value.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Denominator {
    /// `n_j + 1`: keeps p-values in `(0, 1]`.
    #[default]
    PlusOne,
    /// `n_j`: can exceed 1 when the test score is below every calibration score.
    Literal,
}

/// Calibration nonconformity scores bucketed by true class.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationScores<T> {
    pub per_class: PerClass<SortedScores<T>>,
}

impl<T: Scalar> CalibrationScores<T> {
    pub fn from_labelled(scores: impl IntoIterator<Item = (BinaryLabel, T)>) -> Result<Self> {
        let mut buckets: PerClass<Vec<T>> = PerClass::default();
        for (label, s) in scores {
            buckets[label].push(s);
        }
        Ok(CalibrationScores {
            per_class: PerClass::new(
                SortedScores::new(buckets.benign)?,
                SortedScores::new(buckets.malicious)?,
            ),
        })
    }

    pub fn class(&self, label: BinaryLabel) -> &SortedScores<T> {
        &self.per_class[label]
    }

    pub fn sizes(&self) -> PerClass<usize> {
        self.per_class.map(|_, s| s.len())
    }

    pub fn pooled(&self) -> SortedScores<T> {
        let mut all = self.per_class.benign.0.clone();
        all.extend_from_slice(&self.per_class.malicious.0);
        SortedScores::new(all).expect("scores already validated")
    }
}

/// Label-conditional inductive p-value of `label` for a test score computed under that label.
pub fn lcmicp_pvalue<T: Scalar>(
    calibration: &CalibrationScores<T>,
    label: BinaryLabel,
    test_score: T,
    denominator: Denominator,
) -> Result<T> {
    let bucket = calibration.class(label);
    if bucket.is_empty() {
        return Err(Error::EmptyCalibrationBucket(label));
    }
    let n = bucket.len();
    let den = match denominator {
        Denominator::PlusOne => n + 1,
        Denominator::Literal => n,
    };
    Ok(ratio(bucket.count_at_least(test_score) + 1, den))
}

/// Assigns each (instance, hypothesized label) pair to a category.
pub trait MondrianTaxonomy<T> {
    type Category: Ord + Clone + Debug;
    fn category(&self, features: &[T], label: BinaryLabel) -> Self::Category;
}

/// The category is the label itself.
#[derive(Debug, Clone, Copy, Default)]
pub struct LabelConditional;

impl<T> MondrianTaxonomy<T> for LabelConditional {
    type Category = BinaryLabel;
    fn category(&self, _features: &[T], label: BinaryLabel) -> BinaryLabel {
        label
    }
}

/// Calibration scores bucketed by an arbitrary Mondrian taxonomy.
#[derive(Debug, Clone)]
pub struct MondrianScores<C, T> {
    buckets: BTreeMap<C, SortedScores<T>>,
}

impl<C: Ord + Clone + Debug, T: Scalar> MondrianScores<C, T> {
    /// `examples` yields `(features, true label, score)` for each calibration example.
    pub fn calibrate<'a, M>(
        taxonomy: &M,
        examples: impl IntoIterator<Item = (&'a [T], BinaryLabel, T)>,
    ) -> Result<Self>
    where
        M: MondrianTaxonomy<T, Category = C>,
    {
        let mut raw: BTreeMap<C, Vec<T>> = BTreeMap::new();
        for (x, y, s) in examples {
            raw.entry(taxonomy.category(x, y)).or_default().push(s);
        }
        let buckets = raw
            .into_iter()
            .map(|(c, v)| SortedScores::new(v).map(|s| (c, s)))
            .collect::<Result<_>>()?;
        Ok(MondrianScores { buckets })
    }

    pub fn bucket(&self, category: &C) -> Option<&SortedScores<T>> {
        self.buckets.get(category)
    }

    /// `(#{i in category : a_i >= a} + 1) / (n_category + 1)`.
    pub fn pvalue(&self, category: &C, test_score: T) -> Result<T> {
        let bucket = self
            .buckets
            .get(category)
            .filter(|b| !b.is_empty())
            .ok_or_else(|| {
                Error::InvalidParameter(format!("empty Mondrian category {category:?}"))
            })?;
        Ok(ratio(
            bucket.count_at_least(test_score) + 1,
            bucket.len() + 1,
        ))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sorted(v: &[f64]) -> SortedScores<f64> {
        SortedScores::new(v.to_vec()).unwrap()
    }

    #[test]
    fn icp_hand_enumeration() {
        let calib = sorted(&[0.9, 0.1, 0.3, 0.2]);
        assert_eq!(icp_pvalue(&calib, 0.25), 0.6);
        assert_eq!(icp_pvalue(&calib, 0.0), 1.0);
        assert_eq!(icp_pvalue(&calib, 0.95), 0.2);
        // ties count as >=
        assert_eq!(icp_pvalue(&calib, 0.3), 0.6);
    }

    #[test]
    fn lcmicp_hand_enumeration() {
        let calib = CalibrationScores::from_labelled(vec![
            (BinaryLabel::Malicious, 0.8),
            (BinaryLabel::Malicious, 0.2),
            (BinaryLabel::Malicious, 0.5),
            (BinaryLabel::Benign, 0.99),
        ])
        .unwrap();
        let p = |s| lcmicp_pvalue(&calib, BinaryLabel::Malicious, s, Denominator::PlusOne).unwrap();
        assert_eq!(p(0.4), 0.75);
        assert_eq!(p(0.1), 1.0);
        assert_eq!(p(0.81), 0.25);
        let lit: f64 =
            lcmicp_pvalue(&calib, BinaryLabel::Malicious, 0.1, Denominator::Literal).unwrap();
        assert!((lit - 4.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn lcmicp_denominator_is_round_for_899() {
        let calib = CalibrationScores::from_labelled(
            (0..899).map(|i| (BinaryLabel::Benign, i as f64 / 899.0)),
        )
        .unwrap();
        let p = lcmicp_pvalue(&calib, BinaryLabel::Benign, 2.0, Denominator::PlusOne).unwrap();
        assert_eq!(p, 1.0 / 900.0);
    }

    #[test]
    fn empty_bucket_is_an_error() {
        let calib = CalibrationScores::from_labelled(vec![(BinaryLabel::Benign, 0.1)]).unwrap();
        assert!(matches!(
            lcmicp_pvalue(&calib, BinaryLabel::Malicious, 0.5, Denominator::PlusOne),
            Err(Error::EmptyCalibrationBucket(BinaryLabel::Malicious))
        ));
    }

    #[test]
    fn nan_scores_rejected() {
        assert!(SortedScores::new(vec![0.1, f64::NAN]).is_err());
    }

    #[test]
    fn label_conditional_mondrian_matches_class_buckets() {
        let examples: Vec<(Vec<f64>, BinaryLabel, f64)> = (0..30)
            .map(|i| {
                let label = if i % 3 == 0 {
                    BinaryLabel::Malicious
                } else {
                    BinaryLabel::Benign
                };
                (vec![i as f64], label, ((i * 7919) % 31) as f64 / 31.0)
            })
            .collect();
        let mondrian = MondrianScores::calibrate(
            &LabelConditional,
            examples.iter().map(|(x, y, s)| (x.as_slice(), *y, *s)),
        )
        .unwrap();
        let calib =
            CalibrationScores::from_labelled(examples.iter().map(|(_, y, s)| (*y, *s))).unwrap();
        for label in BinaryLabel::ALL {
            for k in 0..=32 {
                let s = k as f64 / 31.0;
                assert_eq!(
                    mondrian.pvalue(&label, s).unwrap(),
                    lcmicp_pvalue(&calib, label, s, Denominator::PlusOne).unwrap()
                );
            }
        }
    }
}
