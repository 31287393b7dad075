use thiserror::Error;

/// Errors surfaced by the optimization and privacy layers.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("undefined rate: {0}")]
    UndefinedRate(String),

    #[error("degenerate instance: {0}")]
    DegenerateInstance(String),

    #[error("oracle contract violated: {0}")]
    ContractViolation(String),

    #[error("audit unsupported: {0}")]
    UnsupportedAudit(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }
}
