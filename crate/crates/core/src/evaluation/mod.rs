//! Experiment harness: forced-prediction metrics, validity curves, the OU and
//! N criteria, and the conventional random forest baseline.

mod baseline;
mod criteria;
mod experiment;
mod metrics;
pub mod report;

pub use baseline::{
    baseline_draws, baseline_rf_sets, baseline_sets_with_draws, inclusion_probability,
};
pub use criteria::{
    mean_curve, mean_grouped, n_criterion, ou_criterion, validity_curve, Grouped, ValidityCurve,
};
pub use experiment::{
    default_delta_grid, run_experiment, run_repetition, ExperimentConfig, ExperimentReport,
    MethodReport, RepetitionReport, TABLE_DELTAS,
};
pub use metrics::{classification_metrics, mean_metrics, MetricsReport};
