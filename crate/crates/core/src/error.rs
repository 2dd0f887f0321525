use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("incompatible array configuration: expected {expected} elements, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("time {t} s outside trace span [{start}, {end}] s")]
    TimeOutOfRange { t: f64, start: f64, end: f64 },

    #[error("frequency {f} Hz outside band [{low}, {high}] Hz")]
    FrequencyOutOfBand { f: f64, low: f64, high: f64 },

    #[error("non-finite filter input {0}")]
    NonFinite(f64),

    #[error("calibration impossible: average SNR at beta = 1 is {0}")]
    CalibrationImpossible(f64),

    #[error("time grids differ: {0}")]
    GridMismatch(String),

    #[error("{path}:{line}: {reason}")]
    Parse {
        path: PathBuf,
        line: usize,
        reason: String,
    },

    #[error("{path}: {reason}")]
    Format { path: PathBuf, reason: String },

    #[error("capture too short: {samples} samples, need at least {needed}")]
    CaptureTooShort { samples: usize, needed: usize },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }
}
