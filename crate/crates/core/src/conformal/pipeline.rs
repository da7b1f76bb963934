//! Binary RF-based label-conditional Mondrian inductive conformal predictor.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{BinaryLabel, Dataset, PerClass};
use crate::error::{Error, Result};
use crate::forest::{ForestParams, Posterior, RandomForest};
use crate::rng::RngSeed;
use crate::scalar::Scalar;

use super::{
    forced_prediction, lcmicp_pvalue, nonconformity, prediction_set, CalibrationScores, CpVariant,
    Denominator, ForcedPrediction, PValues, PredictionSet, TieRule,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct ConformalConfig {
    pub denominator: Denominator,
    pub tie_rule: TieRule,
}

/// A trained forest together with its calibration scores.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RfLcmicp<T> {
    pub forest: RandomForest<T>,
    pub calibration: CalibrationScores<T>,
    pub config: ConformalConfig,
}

/// Everything produced for one test instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prediction<T> {
    pub posterior: Posterior<T>,
    pub p_values: PValues<T>,
    pub forced: ForcedPrediction<T>,
}

impl<T: Scalar> RfLcmicp<T> {
    /// Training phase: fit the forest on the proper training set, then score
    /// each calibration example under its true label.
    pub fn fit(
        proper: &Dataset<T>,
        calibration: &Dataset<T>,
        params: &ForestParams,
        config: ConformalConfig,
        seed: RngSeed,
    ) -> Result<Self> {
        if proper.dimension() != calibration.dimension() {
            return Err(Error::DimensionMismatch {
                expected: proper.dimension(),
                found: calibration.dimension(),
            });
        }
        let forest = RandomForest::train(proper, params, seed)?;
        Self::calibrate(forest, calibration, config)
    }

    pub fn calibrate(
        forest: RandomForest<T>,
        calibration: &Dataset<T>,
        config: ConformalConfig,
    ) -> Result<Self> {
        let labels = calibration.labels()?;
        let posteriors = forest.posteriors(calibration)?;
        let calibration = CalibrationScores::from_labelled(
            labels
                .iter()
                .zip(&posteriors)
                .map(|(&y, p)| (y, nonconformity(p, y))),
        )?;
        for label in BinaryLabel::ALL {
            if calibration.class(label).is_empty() {
                return Err(Error::EmptyCalibrationBucket(label));
            }
        }
        Ok(RfLcmicp {
            forest,
            calibration,
            config,
        })
    }

    pub fn dimension(&self) -> usize {
        self.forest.dimension()
    }

    pub fn p_values_from_posterior(&self, posterior: &Posterior<T>) -> Result<PValues<T>> {
        let p = |label| {
            lcmicp_pvalue(
                &self.calibration,
                label,
                nonconformity(posterior, label),
                self.config.denominator,
            )
        };
        Ok(PValues::new(
            p(BinaryLabel::Benign)?,
            p(BinaryLabel::Malicious)?,
            CpVariant::LabelConditionalInductive,
        ))
    }

    /// Testing phase for one instance.
    pub fn predict(&self, x: &[T]) -> Result<Prediction<T>> {
        let posterior = self.forest.posterior(x)?;
        let p_values = self.p_values_from_posterior(&posterior)?;
        Ok(Prediction {
            posterior,
            p_values,
            forced: forced_prediction(&p_values, self.config.tie_rule),
        })
    }

    pub fn predict_all(&self, data: &Dataset<T>) -> Result<Vec<Prediction<T>>> {
        data.instances()
            .par_iter()
            .map(|inst| self.predict(&inst.features))
            .collect()
    }
}

/// Per-test output of [`rf_lcmicp_pipeline`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestOutcome<T> {
    pub p_values: PValues<T>,
    pub set: PredictionSet<T>,
    pub forced: ForcedPrediction<T>,
}

/// Trains once on `proper`, calibrates on `calibration`, and predicts every instance of `tests`.
pub fn rf_lcmicp_pipeline<T: Scalar>(
    proper: &Dataset<T>,
    calibration: &Dataset<T>,
    tests: &Dataset<T>,
    params: &ForestParams,
    delta: PerClass<T>,
    config: ConformalConfig,
    seed: RngSeed,
) -> Result<(RfLcmicp<T>, Vec<TestOutcome<T>>)> {
    let model = RfLcmicp::fit(proper, calibration, params, config, seed)?;
    let outcomes = model
        .predict_all(tests)?
        .into_iter()
        .map(|p| TestOutcome {
            set: prediction_set(&p.p_values, delta),
            p_values: p.p_values,
            forced: p.forced,
        })
        .collect();
    Ok((model, outcomes))
}
