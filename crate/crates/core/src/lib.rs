//! Random-forest based label-conditional Mondrian inductive conformal
//! prediction for binary malware detection.
//!
//! The algorithms are generic over the floating point type ([`Scalar`]);
//! the aliases at the crate root fix it to `f64` (and `f32` with a `32` suffix).

pub mod conformal;
pub mod data;
pub mod error;
pub mod evaluation;
pub mod features;
pub mod forest;
pub mod io;
pub mod rng;
pub mod scalar;
pub mod synthetic;

pub use conformal::{
    forced_prediction, prediction_set, ConformalConfig, CpVariant, Denominator, TieRule,
};
pub use data::{BinaryLabel, PerClass};
pub use error::{Error, Result};
pub use evaluation::{run_experiment, ExperimentConfig, ExperimentReport};
pub use features::{AggregationKind, FeatureSchema};
pub use forest::{ForestParams, TreeParams};
pub use rng::{RngSeed, Stream};
pub use scalar::Scalar;

pub type Dataset = data::Dataset<f64>;
pub type Instance = data::Instance<f64>;
pub type NormalizationParams = data::NormalizationParams<f64>;
pub type RandomForest = forest::RandomForest<f64>;
pub type DecisionTree = forest::DecisionTree<f64>;
pub type Posterior = forest::Posterior<f64>;
pub type CalibrationScores = conformal::CalibrationScores<f64>;
pub type PValues = conformal::PValues<f64>;
pub type PredictionSet = conformal::PredictionSet<f64>;
pub type ForcedPrediction = conformal::ForcedPrediction<f64>;
pub type RfLcmicp = conformal::RfLcmicp<f64>;
pub type ModelFile = io::ModelFile<f64>;

pub type Dataset32 = data::Dataset<f32>;
pub type Instance32 = data::Instance<f32>;
pub type RandomForest32 = forest::RandomForest<f32>;
pub type CalibrationScores32 = conformal::CalibrationScores<f32>;
pub type PValues32 = conformal::PValues<f32>;
pub type RfLcmicp32 = conformal::RfLcmicp<f32>;
