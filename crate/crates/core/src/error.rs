use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SabrError {
    #[error("invalid {name}: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("degenerate parameters: {0}")]
    Degenerate(String),

    #[error("{0} is unavailable in analytic-leading-order mode")]
    Unavailable(&'static str),

    #[error("invalid quotes: {0}")]
    InvalidQuotes(String),

    #[error("insufficient data: {needed} observations required, got {got}")]
    InsufficientData { needed: usize, got: usize },

    #[error("invalid simulation config: {0}")]
    Config(String),
}

pub type Result<T> = std::result::Result<T, SabrError>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> SabrError {
    SabrError::InvalidParameter {
        name,
        reason: reason.into(),
    }
}
