use thiserror::Error;

/// Errors raised by estimators and divergence evaluations.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("support mismatch: {0}")]
    SupportMismatch(String),
    #[error("invalid probability vector: {0}")]
    InvalidPmf(String),
    #[error("invalid parameter: {0}")]
    InvalidParam(String),
    #[error("invalid data: {0}")]
    InvalidData(String),
    #[error("overflow: {0}")]
    Overflow(String),
    #[error("non-finite value encountered after {iterations} iterations: {detail}")]
    NonFinite {
        detail: String,
        iterations: usize,
        last: Vec<f64>,
    },
    #[error("divergent iterates (norm {norm:.3e}) after {iterations} iterations")]
    Divergent {
        norm: f64,
        iterations: usize,
        trace: Vec<f64>,
    },
    #[error("degenerate input: {0}")]
    Degenerate(String),
}

pub type Result<T> = std::result::Result<T, Error>;
