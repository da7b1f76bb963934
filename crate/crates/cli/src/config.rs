//! Flat TOML run configuration. Every key is optional; command-line flags
//! override the file.

use std::path::Path;

use serde::{Deserialize, Serialize};

use lcmicp::conformal::{ConformalConfig, Denominator, TieRule};
use lcmicp::evaluation::{default_delta_grid, ExperimentConfig, TABLE_DELTAS};
use lcmicp::forest::{ForestParams, SplitCriterion, TreeParams};
use lcmicp::synthetic::GaussianSpec;
use lcmicp::{AggregationKind, PerClass, RngSeed};

use crate::failure::Failure;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,

    pub trees: usize,
    pub mtry: Option<usize>,
    pub min_leaf_count: usize,
    pub max_depth: Option<usize>,
    pub bootstrap: bool,
    pub criterion: SplitCriterion,

    pub calibration_fraction: f64,
    pub denominator: Denominator,
    pub tie_rule: TieRule,
    /// Min-max scaling fitted on the training data.
    pub normalize: bool,

    pub repetitions: usize,
    /// Malicious share of the training set in percent: 25 or 10. Unset means
    /// 25, or the regime of the reproduced table.
    pub imbalance: Option<u32>,
    /// Explicit training counts; override `imbalance` when both are set.
    pub train_benign: Option<usize>,
    pub train_malicious: Option<usize>,
    pub test_benign: usize,
    pub test_malicious: usize,
    pub delta_grid: Vec<f64>,
    pub table_deltas: Vec<f64>,

    pub synthetic_dimension: usize,
    pub synthetic_separation: f64,
    pub synthetic_benign: usize,
    pub synthetic_malicious: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        let forest = ForestParams::default();
        let synthetic = GaussianSpec::default();
        RunConfig {
            seed: 0,
            trees: forest.trees,
            mtry: forest.tree.mtry,
            min_leaf_count: forest.tree.min_leaf_count,
            max_depth: forest.tree.max_depth,
            bootstrap: forest.tree.bootstrap,
            criterion: forest.tree.criterion,
            calibration_fraction: 0.2,
            denominator: Denominator::default(),
            tie_rule: TieRule::default(),
            normalize: true,
            repetitions: 100,
            imbalance: None,
            train_benign: None,
            train_malicious: None,
            test_benign: 300,
            test_malicious: 300,
            delta_grid: default_delta_grid(),
            table_deltas: TABLE_DELTAS.to_vec(),
            synthetic_dimension: synthetic.dimension,
            synthetic_separation: synthetic.separation,
            synthetic_benign: synthetic.counts.benign,
            synthetic_malicious: synthetic.counts.malicious,
        }
    }
}

/// Training counts of the two class-imbalance regimes.
pub fn imbalance_counts(percent: u32) -> Option<PerClass<usize>> {
    match percent {
        25 => Some(PerClass::new(4500, 1500)),
        10 => Some(PerClass::new(4500, 500)),
        _ => None,
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, Failure> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Failure::usage(format!("cannot read config {}: {e}", path.display())))?;
        let cfg: RunConfig = toml::from_str(&text)
            .map_err(|e| Failure::usage(format!("invalid config {}: {e}", path.display())))?;
        Ok(cfg)
    }

    pub fn forest(&self) -> ForestParams {
        ForestParams {
            trees: self.trees,
            tree: TreeParams {
                mtry: self.mtry,
                min_leaf_count: self.min_leaf_count,
                max_depth: self.max_depth,
                bootstrap: self.bootstrap,
                criterion: self.criterion,
            },
        }
    }

    pub fn conformal(&self) -> ConformalConfig {
        ConformalConfig {
            denominator: self.denominator,
            tie_rule: self.tie_rule,
        }
    }

    pub fn train_counts(&self) -> Result<PerClass<usize>, Failure> {
        let percent = self.imbalance.unwrap_or(25);
        let regime = imbalance_counts(percent).ok_or_else(|| {
            Failure::usage(format!("imbalance must be 25 or 10, found {percent}"))
        })?;
        Ok(PerClass::new(
            self.train_benign.unwrap_or(regime.benign),
            self.train_malicious.unwrap_or(regime.malicious),
        ))
    }

    pub fn synthetic(&self) -> GaussianSpec {
        GaussianSpec {
            dimension: self.synthetic_dimension,
            separation: self.synthetic_separation,
            counts: PerClass::new(self.synthetic_benign, self.synthetic_malicious),
        }
    }

    pub fn experiment(&self, kind: Option<AggregationKind>) -> Result<ExperimentConfig, Failure> {
        let cfg = ExperimentConfig {
            feature_kind: kind,
            train_counts: self.train_counts()?,
            test_counts: PerClass::new(self.test_benign, self.test_malicious),
            calibration_fraction: self.calibration_fraction,
            forest: self.forest(),
            repetitions: self.repetitions,
            delta_grid: self.delta_grid.clone(),
            table_deltas: self.table_deltas.clone(),
            root_seed: RngSeed(self.seed),
            conformal: self.conformal(),
            baseline: true,
            normalize: self.normalize,
        };
        cfg.validate().map_err(Failure::usage)?;
        Ok(cfg)
    }

    /// Checks every knob that can be checked without data.
    pub fn validate(&self) -> Result<(), Failure> {
        self.experiment(None)?;
        if self.min_leaf_count == 0 {
            return Err(Failure::usage("min_leaf_count must be at least 1"));
        }
        if self.mtry == Some(0) {
            return Err(Failure::usage("mtry must be at least 1"));
        }
        if self.synthetic_dimension == 0 || !self.synthetic_separation.is_finite() {
            return Err(Failure::usage(
                "synthetic dimension must be positive and separation finite",
            ));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_document_is_default() {
        let cfg: RunConfig = toml::from_str("").unwrap();
        assert_eq!(cfg, RunConfig::default());
        assert_eq!(cfg.forest(), ForestParams::default());
    }

    #[test]
    fn flat_keys_and_unknown_key() {
        let cfg: RunConfig =
            toml::from_str("trees = 20\ndenominator = \"literal\"\ntie_rule = \"malicious\"")
                .unwrap();
        assert_eq!(cfg.trees, 20);
        assert_eq!(cfg.denominator, Denominator::Literal);
        assert!(toml::from_str::<RunConfig>("tress = 20").is_err());
    }

    #[test]
    fn regimes() {
        let mut cfg = RunConfig::default();
        assert_eq!(cfg.train_counts().unwrap(), PerClass::new(4500, 1500));
        cfg.imbalance = Some(10);
        assert_eq!(cfg.train_counts().unwrap(), PerClass::new(4500, 500));
        cfg.imbalance = Some(50);
        assert!(cfg.train_counts().is_err());
    }

    #[test]
    fn invalid_values_rejected() {
        let cfg = RunConfig {
            calibration_fraction: 1.5,
            ..RunConfig::default()
        };
        assert!(cfg.validate().is_err());
        let cfg = RunConfig {
            repetitions: 0,
            ..RunConfig::default()
        };
        assert!(cfg.validate().is_err());
    }
}
