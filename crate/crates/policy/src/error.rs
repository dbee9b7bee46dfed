use nds_core::CoreError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum PolicyError {
    #[error(transparent)]
    Core(#[from] CoreError),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("contract violation: {0}")]
    Contract(String),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("checkpoint is corrupt: {0}")]
    Corrupt(String),
    #[error("checkpoint does not match the model: {0}")]
    ShapeMismatch(String),
    #[error("non-finite values during training: {0}")]
    NonFinite(String),
}

pub type Result<T> = std::result::Result<T, PolicyError>;

impl From<PolicyError> for CoreError {
    fn from(e: PolicyError) -> CoreError {
        match e {
            PolicyError::Core(c) => c,
            other => CoreError::Contract(other.to_string()),
        }
    }
}
