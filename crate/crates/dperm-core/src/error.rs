//! Error type shared by every module.

use thiserror::Error;

/// Errors surfaced by geometry, losses, samplers, mechanisms and the harness.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("invalid body: {0}")]
    InvalidBody(String),

    #[error("empty body: {0}")]
    EmptyBody(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("precondition violated: {0}")]
    PreconditionViolation(String),

    #[error("numerical failure: {0}")]
    NumericalFailure(String),

    #[error("privacy calibration bug: {0}")]
    CalibrationBug(String),

    #[error("oracle too large: {0}")]
    OracleTooLarge(String),

    #[error("step budget exceeded: {0}")]
    BudgetExceeded(String),

    #[error("packing failure: {0}")]
    PackingFailure(String),

    #[error("use the efficient sampling variant: {0}")]
    UseEfficientVariant(String),

    #[error("invalid weight: {0}")]
    InvalidWeight(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }
}
