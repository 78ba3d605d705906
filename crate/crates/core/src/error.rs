use thiserror::Error;

/// Errors raised by the numerical core.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid group: {0}")]
    InvalidGroup(String),

    #[error("scale factor must be positive, got {0}")]
    NonPositiveScale(f64),

    #[error("point {0:?} lies outside the domain of the field")]
    OutsideDomain(Vec<f64>),

    #[error("empty domain: {0}")]
    EmptyDomain(String),

    #[error("gradient unavailable: {0}")]
    GradientUnavailable(String),

    #[error("margin violation: {0}")]
    MarginViolation(String),

    #[error("hypothesis violated: {0}")]
    Hypothesis(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn check_dim(expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected, got })
    }
}
