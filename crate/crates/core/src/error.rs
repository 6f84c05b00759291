use thiserror::Error;

/// Errors raised by the numerical modules.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("admissibility violated: {0}")]
    Admissibility(String),

    #[error("infeasible parameters: {0}")]
    Infeasible(String),

    #[error("unsupported regime: {0}")]
    Unsupported(String),

    #[error("index out of range: {0}")]
    Range(String),

    #[error("value overflows f64 (natural log of value: {ln_value})")]
    Overflow { ln_value: f64 },

    #[error("{what}: accuracy {achieved:e} not within requested {requested:e}")]
    Accuracy {
        what: String,
        achieved: f64,
        requested: f64,
    },

    #[error("grid resolution: {0}")]
    Resolution(String),

    #[error("certification failed [{check}]: {detail}")]
    Certification { check: String, detail: String },
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn param(msg: impl Into<String>) -> Error {
    Error::Parameter(msg.into())
}
