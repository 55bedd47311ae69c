use thiserror::Error;

#[derive(Debug, Error)]
pub enum HkError {
    /// An argument lies outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),
    /// A configured resource cap (denominator size, step budget) was exceeded.
    #[error("resource limit exceeded: {0}")]
    Resource(String),
    /// The envelope recursion cannot continue soundly.
    #[error("certification failure: {0}")]
    CertificationFailure(String),
    #[error("parse error: {0}")]
    Parse(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = HkError> = std::result::Result<T, E>;

pub(crate) fn domain(msg: impl Into<String>) -> HkError {
    HkError::Domain(msg.into())
}
