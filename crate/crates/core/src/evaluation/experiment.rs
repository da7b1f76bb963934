use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::conformal::{prediction_set, uniform, ConformalConfig, PredictionSet, RfLcmicp};
use crate::data::{
    calibration_split, normalize, stratified_sample, BinaryLabel, Dataset, PerClass,
};
use crate::error::{Error, Result};
use crate::features::AggregationKind;
use crate::forest::{argmax, ForestParams, RandomForest};
use crate::rng::{RngSeed, Stream};
use crate::scalar::Scalar;

use super::baseline::{baseline_draws, baseline_sets_with_draws};
use super::criteria::{
    mean_curve, mean_grouped, n_criterion, ou_criterion, validity_curve, Grouped, ValidityCurve,
};
use super::metrics::{classification_metrics, mean_metrics, MetricsReport};

/// Significance levels of the set-size tables (95%, 90%, 85% and 80% confidence).
pub const TABLE_DELTAS: [f64; 4] = [0.05, 0.10, 0.15, 0.20];

/// `{0.01, 0.02, …, 0.99}`.
pub fn default_delta_grid() -> Vec<f64> {
    (1..100).map(|k| k as f64 / 100.0).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    /// `None` for data that did not come from aggregated recordings.
    pub feature_kind: Option<AggregationKind>,
    pub train_counts: PerClass<usize>,
    pub test_counts: PerClass<usize>,
    pub calibration_fraction: f64,
    pub forest: ForestParams,
    pub repetitions: usize,
    pub delta_grid: Vec<f64>,
    pub table_deltas: Vec<f64>,
    pub root_seed: RngSeed,
    pub conformal: ConformalConfig,
    /// Train and evaluate the conventional forest alongside.
    pub baseline: bool,
    /// Min-max scaling fitted on each training sample.
    pub normalize: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            feature_kind: Some(AggregationKind::MeanDiff),
            train_counts: PerClass::new(4500, 1500),
            test_counts: PerClass::new(300, 300),
            calibration_fraction: 0.2,
            forest: ForestParams::default(),
            repetitions: 100,
            delta_grid: default_delta_grid(),
            table_deltas: TABLE_DELTAS.to_vec(),
            root_seed: RngSeed(0),
            conformal: ConformalConfig::default(),
            baseline: true,
            normalize: true,
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidParameter(m));
        if self.repetitions == 0 {
            return bad("repetitions must be at least 1".into());
        }
        if !(self.calibration_fraction > 0.0 && self.calibration_fraction < 1.0) {
            return bad(format!(
                "calibration fraction {} outside (0, 1)",
                self.calibration_fraction
            ));
        }
        if self.forest.trees == 0 {
            return bad("forest needs at least one tree".into());
        }
        if self.delta_grid.is_empty() {
            return bad("delta grid is empty".into());
        }
        let in_range = |d: f64| (0.0..1.0).contains(&d);
        if !self.delta_grid.iter().all(|&d| in_range(d))
            || !self.delta_grid.windows(2).all(|w| w[0] < w[1])
        {
            return bad("delta grid must be strictly increasing within [0, 1)".into());
        }
        if !self.table_deltas.iter().all(|&d| in_range(d)) {
            return bad("table deltas must lie within [0, 1)".into());
        }
        for label in BinaryLabel::ALL {
            if self.test_counts[label] == 0 || self.train_counts[label] == 0 {
                return bad(format!("{label} train and test counts must be positive"));
            }
        }
        Ok(())
    }

    pub fn feature_set_name(&self) -> &'static str {
        self.feature_kind.map_or("synthetic", AggregationKind::name)
    }
}

/// Results of one method in one repetition, or averaged over repetitions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodReport {
    pub metrics: MetricsReport,
    pub curve: ValidityCurve,
    /// Set sizes at each table delta.
    pub n: Vec<Grouped>,
}

impl MethodReport {
    fn mean(items: &[&MethodReport]) -> Option<MethodReport> {
        let first = items.first()?;
        let metrics: Vec<_> = items.iter().map(|m| m.metrics).collect();
        let curves: Vec<_> = items.iter().map(|m| m.curve.clone()).collect();
        let n = (0..first.n.len())
            .map(|k| mean_grouped(&items.iter().map(|m| m.n[k]).collect::<Vec<_>>()))
            .collect();
        Some(MethodReport {
            metrics: mean_metrics(&metrics),
            curve: mean_curve(&curves)?,
            n,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RepetitionReport {
    pub index: usize,
    pub seed: RngSeed,
    pub lcmicp: MethodReport,
    pub ou: Grouped,
    pub rf: Option<MethodReport>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub config: ExperimentConfig,
    pub feature_set: String,
    pub lcmicp: MethodReport,
    pub ou: Grouped,
    pub rf: Option<MethodReport>,
    pub repetitions: Vec<RepetitionReport>,
}

fn sets_over<T: Scalar>(
    deltas: &[f64],
    f: impl Fn(T) -> Vec<PredictionSet<T>>,
    n: usize,
) -> Vec<Vec<PredictionSet<T>>> {
    let mut rows: Vec<Vec<PredictionSet<T>>> =
        (0..n).map(|_| Vec::with_capacity(deltas.len())).collect();
    for &d in deltas {
        for (row, s) in rows.iter_mut().zip(f(T::lit(d))) {
            row.push(s);
        }
    }
    rows
}

/// One repetition: sample test and training sets, normalize on the training
/// set, split off calibration data, train both methods and evaluate them.
pub fn run_repetition<T: Scalar>(
    cfg: &ExperimentConfig,
    data: &Dataset<T>,
    index: usize,
) -> Result<RepetitionReport> {
    let seed = cfg.root_seed.child(Stream::Repetition, index as u64);
    let (test_idx, rest_idx) =
        stratified_sample(data, cfg.test_counts, seed.child(Stream::TestSample, 0))?;
    let rest = data.subset(&rest_idx);
    let (train_idx, _) =
        stratified_sample(&rest, cfg.train_counts, seed.child(Stream::TrainSample, 0))?;
    let raw_train = rest.subset(&train_idx);
    let raw_test = data.subset(&test_idx);
    let (train, test) = if cfg.normalize {
        let (train, mut others, _) = normalize(&raw_train, &[&raw_test])?;
        (train, others.remove(0))
    } else {
        (raw_train, raw_test)
    };
    let truths = test.labels()?;

    let plan = calibration_split(
        &train,
        cfg.calibration_fraction,
        seed.child(Stream::Calibration, 0),
    )?;
    let proper = train.subset(&plan.proper_training);
    let calibration = train.subset(&plan.calibration);
    let model = RfLcmicp::fit(
        &proper,
        &calibration,
        &cfg.forest,
        cfg.conformal,
        seed.child(Stream::Forest, 0),
    )?;
    let predictions = model.predict_all(&test)?;
    let p_values: Vec<_> = predictions.iter().map(|p| p.p_values).collect();
    let lcmicp_sets = |d: T| {
        p_values
            .iter()
            .map(|p| prediction_set(p, uniform(d)))
            .collect()
    };

    let lcmicp = MethodReport {
        metrics: classification_metrics(
            predictions
                .iter()
                .map(|p| p.forced.label)
                .zip(truths.iter().copied()),
        )?,
        curve: validity_curve(
            &cfg.delta_grid,
            &sets_over(&cfg.delta_grid, lcmicp_sets, test.len()),
            &truths,
        )?,
        n: n_criterion(
            &sets_over(&cfg.table_deltas, lcmicp_sets, test.len()),
            &truths,
            cfg.table_deltas.len(),
        )?,
    };
    let ou = ou_criterion(
        &p_values
            .iter()
            .copied()
            .zip(truths.iter().copied())
            .collect::<Vec<_>>(),
    )?;

    let rf = if cfg.baseline {
        let forest =
            RandomForest::train(&train, &cfg.forest, seed.child(Stream::BaselineForest, 0))?;
        let posteriors = forest.posteriors(&test)?;
        let tie = cfg.conformal.tie_rule;
        let draws = baseline_draws::<T>(test.len(), seed.child(Stream::BaselineDraw, 0));
        let rf_sets = |d: T| baseline_sets_with_draws(&posteriors, d, &draws, tie);
        Some(MethodReport {
            metrics: classification_metrics(
                posteriors
                    .iter()
                    .map(|p| argmax(p, tie.label()))
                    .zip(truths.iter().copied()),
            )?,
            curve: validity_curve(
                &cfg.delta_grid,
                &sets_over(&cfg.delta_grid, rf_sets, test.len()),
                &truths,
            )?,
            n: n_criterion(
                &sets_over(&cfg.table_deltas, rf_sets, test.len()),
                &truths,
                cfg.table_deltas.len(),
            )?,
        })
    } else {
        None
    };

    Ok(RepetitionReport {
        index,
        seed,
        lcmicp,
        ou,
        rf,
    })
}

/// Runs every repetition (in parallel) and averages them in repetition order.
pub fn run_experiment<T: Scalar>(
    cfg: &ExperimentConfig,
    data: &Dataset<T>,
) -> Result<ExperimentReport> {
    cfg.validate()?;
    let repetitions = (0..cfg.repetitions)
        .into_par_iter()
        .map(|r| run_repetition(cfg, data, r))
        .collect::<Result<Vec<_>>>()?;
    let lcmicp = MethodReport::mean(&repetitions.iter().map(|r| &r.lcmicp).collect::<Vec<_>>())
        .ok_or(Error::EmptyDataset)?;
    let rf = MethodReport::mean(
        &repetitions
            .iter()
            .filter_map(|r| r.rf.as_ref())
            .collect::<Vec<_>>(),
    );
    let ou = mean_grouped(&repetitions.iter().map(|r| r.ou).collect::<Vec<_>>());
    Ok(ExperimentReport {
        config: cfg.clone(),
        feature_set: cfg.feature_set_name().to_string(),
        lcmicp,
        ou,
        rf,
        repetitions,
    })
}
