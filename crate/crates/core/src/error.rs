use thiserror::Error;

/// Errors produced by the facility-location toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("no facilities")]
    NoFacilities,
    #[error("zero minimum distance (duplicate points)")]
    ZeroMinDistance,
    #[error("need at least {need} points, got {got}")]
    TooFewPoints { need: usize, got: usize },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("oracle scale exceeded: {size} points, limit {limit}")]
    OracleScaleExceeded { size: usize, limit: usize },
    #[error("invalid level {level}, top level is {top}")]
    InvalidLevel { level: usize, top: usize },
    #[error("metric violation: {0}")]
    MetricViolation(String),
    #[error("parse error: {0}")]
    Parse(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidParameter(msg.into())
}
