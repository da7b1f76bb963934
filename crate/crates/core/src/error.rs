use thiserror::Error;

use crate::data::BinaryLabel;

/// Errors raised by the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("empty dataset")]
    EmptyDataset,

    #[error("duplicate instance id {0:?}")]
    DuplicateId(String),

    #[error("not enough {label} instances: requested {requested}, available {available}")]
    InsufficientClass {
        label: BinaryLabel,
        requested: usize,
        available: usize,
    },

    #[error(
        "calibration split leaves no {label} calibration examples ({available} training examples)"
    )]
    EmptyCalibrationClass {
        label: BinaryLabel,
        available: usize,
    },

    #[error("no calibration scores for class {0}")]
    EmptyCalibrationBucket(BinaryLabel),

    #[error("instance {0:?} has no label")]
    MissingLabel(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("feature schema mismatch: {0}")]
    Schema(String),

    #[error("line {line}: {message}")]
    Malformed { line: u64, message: String },

    #[error("model format: {0}")]
    ModelFormat(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
