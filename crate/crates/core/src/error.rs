use thiserror::Error;

#[derive(Debug, Error)]
pub enum DrnError {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("support mismatch: {left} vs {right}")]
    SupportMismatch { left: String, right: String },

    #[error("numerical error: {0}")]
    Numerical(String),

    #[error("training aborted at epoch {epoch}: {source}")]
    TrainingAborted {
        epoch: usize,
        #[source]
        source: Box<DrnError>,
    },

    #[error("malformed file: {0}")]
    Format(#[from] serde_json::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = DrnError> = std::result::Result<T, E>;

pub(crate) fn invalid(msg: impl Into<String>) -> DrnError {
    DrnError::InvalidInput(msg.into())
}

pub(crate) fn numerical(msg: impl Into<String>) -> DrnError {
    DrnError::Numerical(msg.into())
}
