use thiserror::Error;

use crate::graph::TopologyError;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Topology(#[from] TopologyError),

    /// A state entry became NaN or infinite. `t` is the last time at which
    /// the state was still finite.
    #[error("non-finite state encountered after t = {t}")]
    NonFiniteState { t: f64 },

    #[error("validation failed: {rule}: {detail}")]
    ValidationFailed { rule: String, detail: String },

    #[error("hypothesis violated: {0}")]
    HypothesisViolated(String),

    #[error("operation requires a leader but the state has none")]
    NoLeader,

    #[error("invalid bounds: {0}")]
    InvalidBounds(String),

    #[error("parse error at `{path}`: {message}")]
    Parse { path: String, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn validation(rule: impl Into<String>, detail: impl Into<String>) -> Self {
        Error::ValidationFailed {
            rule: rule.into(),
            detail: detail.into(),
        }
    }
}
