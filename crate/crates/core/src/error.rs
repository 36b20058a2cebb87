use thiserror::Error;

/// Errors raised by the simulation engine.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParam { name: &'static str, reason: String },

    #[error("index out of range: {0}")]
    OutOfRange(String),

    #[error("degenerate geometry: {0}")]
    Degenerate(String),

    #[error("malformed feedback: {0}")]
    MalformedFeedback(String),

    #[error("budget exceeded: {what} needs {required} entries, limit is {limit}")]
    Budget {
        what: &'static str,
        required: u128,
        limit: u128,
    },

    #[error("normalization failure: {0}")]
    Normalization(String),

    #[error("scenario file: {0}")]
    ScenarioFormat(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParam {
        name,
        reason: reason.into(),
    }
}
