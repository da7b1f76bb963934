//! Scalar abstraction shared by every numeric routine in the crate.
//!
//! Features, split thresholds, posteriors, nonconformity scores and p-values are
//! all carried in a `Scalar`. `f64` is the working precision used by the CLI and
//! the experiment harness; `f32` is supported for memory-constrained callers.

use std::fmt::{Debug, Display};
use std::iter::Sum;
use std::str::FromStr;

use num_traits::{Float, FromPrimitive, ToPrimitive};
use serde::de::DeserializeOwned;
use serde::Serialize;

/// Floating point type usable as a feature value, probability or score.
pub trait Scalar:
    Float
    + FromPrimitive
    + ToPrimitive
    + Debug
    + Display
    + Default
    + FromStr
    + Sum
    + Send
    + Sync
    + Serialize
    + DeserializeOwned
    + 'static
{
    /// Lossless-enough conversion from a count.
    fn from_count(n: usize) -> Self {
        Self::from_usize(n).expect("count representable as float")
    }

    /// Conversion from an `f64` constant.
    fn lit(v: f64) -> Self {
        Self::from_f64(v).expect("f64 representable")
    }

    fn as_f64(self) -> f64 {
        self.to_f64().expect("float converts to f64")
    }

    /// Tolerance used when checking that probability vectors sum to one.
    fn sum_tolerance() -> Self;
}

impl Scalar for f64 {
    fn sum_tolerance() -> Self {
        1e-9
    }
}

impl Scalar for f32 {
    fn sum_tolerance() -> Self {
        1e-5
    }
}

/// Ratio `(numerator) / (denominator)` of two counts.
pub(crate) fn ratio<T: Scalar>(numerator: usize, denominator: usize) -> T {
    T::from_count(numerator) / T::from_count(denominator)
}
