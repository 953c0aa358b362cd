use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("action {action} out of range for {k} actions")]
    ActionOutOfRange { action: usize, k: usize },

    #[error("propensity must be in (0, 1], got {0}")]
    InvalidPropensity(f64),

    #[error("singular normal equations for action {0}")]
    SingularSystem(usize),

    #[error("degenerate distribution: {0}")]
    Degenerate(String),

    #[error("invalid instance: {0}")]
    InvalidInstance(String),

    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidInput(msg.into())
}
