use thiserror::Error;

/// Errors raised by the geometry, solvers and the experiment harness.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid norm exponent p = {0} (must be >= 1)")]
    InvalidExponent(f64),

    #[error("prox setups are defined for p in [1, 2], got p = {0}")]
    ProxExponent(f64),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("{what} did not converge within {iterations} iterations")]
    NoConvergence { what: &'static str, iterations: usize },

    #[error("non-finite subgradient at step {step}")]
    NonFinite { step: usize },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("saddle solver hit the iteration cap {cap}: gap_x = {gap_x:e}, gap_y = {gap_y:e}, target = {target:e}")]
    SaddleCap {
        cap: usize,
        gap_x: f64,
        gap_y: f64,
        target: f64,
    },

    #[error("trial {trial} (seed {seed}): {source}")]
    Trial {
        trial: u64,
        seed: u64,
        #[source]
        source: Box<Error>,
    },

    #[error("io error: {0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        name,
        reason: reason.into(),
    }
}
