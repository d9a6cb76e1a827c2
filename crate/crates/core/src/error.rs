use thiserror::Error;

use crate::data::DataError;

/// Errors produced by the core library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("size constraint k = {k} is infeasible with {positive} positive weights")]
    InfeasibleConstraint { k: usize, positive: usize },
    #[error("cannot sample from a distribution with zero total mass")]
    EmptyDistribution,
    #[error("configuration error: {0}")]
    Config(String),
    #[error("non-finite parameters at step {step}")]
    Numeric { step: usize },
    #[error("trace does not carry {0}; enable the matching instrumentation")]
    MissingInstrumentation(&'static str),
    #[error(transparent)]
    Data(#[from] DataError),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidInput(msg.into())
}
