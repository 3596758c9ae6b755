use thiserror::Error;

/// Errors produced by the library.
#[derive(Debug, Error)]
pub enum EsdsError {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("singular model: {0}")]
    SingularModel(String),

    #[error("numerical failure in {backend} backend: {detail}")]
    Numerical { backend: &'static str, detail: String },

    #[error("rollout diverged at step {step}: {detail}")]
    Divergence { step: usize, detail: String },

    #[error("missing velocities in demonstration")]
    MissingVelocities,

    #[error("unsupported model document: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = EsdsError> = std::result::Result<T, E>;

pub(crate) fn check_dim(expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(EsdsError::DimensionMismatch { expected, got })
    }
}
