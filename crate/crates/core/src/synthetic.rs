//! Two-Gaussian stand-in for the recordings corpus.
//!
//! Benign instances are drawn from `N(0, I)` and malicious ones from
//! `N(separation * 1, I)` in `dimension` dimensions.

use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::data::{BinaryLabel, Dataset, Instance, PerClass};
use crate::error::{Error, Result};
use crate::rng::{RngSeed, Stream};
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GaussianSpec {
    pub dimension: usize,
    /// Per-coordinate shift of the malicious mean.
    pub separation: f64,
    pub counts: PerClass<usize>,
}

impl Default for GaussianSpec {
    /// Pool with the class sizes of the real corpus and roughly the same
    /// attainable accuracy (about 75%).
    fn default() -> Self {
        GaussianSpec {
            dimension: 5,
            separation: 0.6,
            counts: PerClass::new(4816, 1866),
        }
    }
}

impl GaussianSpec {
    pub fn generate<T: Scalar>(&self, seed: RngSeed) -> Result<Dataset<T>> {
        if self.dimension == 0 {
            return Err(Error::InvalidParameter(
                "synthetic dimension must be positive".into(),
            ));
        }
        if !self.separation.is_finite() {
            return Err(Error::InvalidParameter(
                "synthetic separation must be finite".into(),
            ));
        }
        let mut instances = Vec::with_capacity(self.counts.benign + self.counts.malicious);
        for label in BinaryLabel::ALL {
            let mut rng = seed.child(Stream::Synthetic, label.code() as u64).rng();
            let shift = match label {
                BinaryLabel::Benign => 0.0,
                BinaryLabel::Malicious => self.separation,
            };
            for i in 0..self.counts[label] {
                let features = (0..self.dimension)
                    .map(|_| {
                        let z: f64 = StandardNormal.sample(&mut rng);
                        T::lit(z + shift)
                    })
                    .collect();
                instances.push(Instance::new(
                    format!("syn-{}-{i}", label.name()),
                    features,
                    Some(label),
                ));
            }
        }
        Dataset::unnamed(self.dimension, instances)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn generates_requested_counts_deterministically() {
        let spec = GaussianSpec {
            dimension: 3,
            separation: 1.0,
            counts: PerClass::new(20, 5),
        };
        let a: Dataset<f64> = spec.generate(RngSeed(1)).unwrap();
        let b: Dataset<f64> = spec.generate(RngSeed(1)).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.class_counts(), PerClass::new(20, 5));
        assert_eq!(a.dimension(), 3);
        let c: Dataset<f64> = spec.generate(RngSeed(2)).unwrap();
        assert_ne!(a, c);
    }
}
