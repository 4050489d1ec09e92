use thiserror::Error;

/// Errors surfaced by the toolkit.
///
/// Numerical verdicts (a failed range check, a non-viable market) are *not*
/// errors; they are reported in the corresponding result types. Errors are
/// reserved for invalid inputs and for arithmetic that cannot continue.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("non-finite value produced at step {step} (asset {asset})")]
    NonFinite { step: usize, asset: usize },

    #[error("portfolio return {ret} <= -1 at step {step}: wealth wiped out by leverage")]
    BlowThrough { step: usize, ret: f64 },

    #[error("csv: {0}")]
    Csv(String),

    #[error("non-positive price at row {row}, column {col}: {value}")]
    NonPositivePrice { row: usize, col: usize, value: f64 },

    #[error("times must be strictly increasing: row {row} has t={value}")]
    NonMonotoneTime { row: usize, value: f64 },

    #[error("matrix is not symmetric: max asymmetry {asymmetry}")]
    NotSymmetric { asymmetry: f64 },

    #[error("ensemble of {got} paths is too small (need at least {need})")]
    EnsembleTooSmall { got: usize, need: usize },

    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
