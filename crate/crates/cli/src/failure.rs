//! Error type carrying the process exit code.

use std::fmt;

/// 1: usage or configuration, 2: data, 3: internal invariant violation.
#[derive(Debug)]
pub struct Failure {
    pub code: i32,
    pub message: String,
}

impl Failure {
    pub fn usage(message: impl fmt::Display) -> Self {
        Failure {
            code: 1,
            message: message.to_string(),
        }
    }

    pub fn data(message: impl fmt::Display) -> Self {
        Failure {
            code: 2,
            message: message.to_string(),
        }
    }

    pub fn invariant(message: impl fmt::Display) -> Self {
        Failure {
            code: 3,
            message: message.to_string(),
        }
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl From<lcmicp::Error> for Failure {
    fn from(e: lcmicp::Error) -> Self {
        use lcmicp::Error::*;
        match e {
            InvalidParameter(_) => Failure::usage(e),
            EmptyCalibrationBucket(_) => Failure::invariant(e),
            _ => Failure::data(e),
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::data(e)
    }
}

impl From<serde_json::Error> for Failure {
    fn from(e: serde_json::Error) -> Self {
        Failure::data(e)
    }
}
