use thiserror::Error;

use crate::system::ValidationReport;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid system: {0}")]
    InvalidSystem(ValidationReport),

    #[error("stage index {index} outside 1..={p}")]
    StageOutOfRange { index: usize, p: usize },

    #[error("time {t} outside [{lo}, {hi}]")]
    TimeOutOfRange { t: f64, lo: f64, hi: f64 },

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("negative time {0} for a dense generator")]
    NegativeTime(f64),

    #[error("dimension mismatch in {what}: expected {expected}, got {got}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("matrix is not symmetric (asymmetry {0:e})")]
    NotSymmetric(f64),

    #[error("{0}")]
    Unsupported(&'static str),

    #[error("horizon after the last impulse is {available}, need at least {required}")]
    HorizonTooShort { available: f64, required: f64 },

    #[error("invalid control: {0}")]
    InvalidControl(String),

    #[error("invalid wave model: {0}")]
    InvalidModel(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("{path}: {message}")]
    Parse { path: String, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
