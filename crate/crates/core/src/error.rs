use thiserror::Error;

/// Errors produced anywhere in the engine.
#[derive(Debug, Error)]
pub enum EaseError {
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("invalid batch: {0}")]
    InvalidBatch(String),
    #[error("label {label} out of range for {classes} classes")]
    Label { label: f64, classes: usize },
    #[error("contract violation: {0}")]
    Contract(String),
    #[error("cannot score features: {0}")]
    CannotScore(String),
    #[error("training diverged at epoch {epoch}: loss is {loss}")]
    Divergence { epoch: usize, loss: f64 },
    #[error("load error: {0}")]
    Load(String),
    #[error("invalid split ratios: {0}")]
    InvalidRatio(String),
    #[error("checkpoint error: {0}")]
    Checkpoint(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, EaseError>;
