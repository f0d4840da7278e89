//! Crate-wide error type.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("packing failure: accepted {accepted} of {requested} points in {attempts} attempts (separation too large for this dimension/count)")]
    PackingFailure {
        requested: usize,
        accepted: usize,
        attempts: usize,
    },

    #[error("admissibility violation: residual norm {norm} exceeds {limit} at level {level}")]
    AdmissibilityViolation { norm: f64, limit: f64, level: usize },

    #[error("validation error: {0}")]
    Validation(String),

    #[error("empty cell at address {0}")]
    EmptyCell(String),

    #[error("training failure: {0}")]
    TrainingFailure(String),

    #[error("parse error: {0}")]
    Parse(#[from] serde_json::Error),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
