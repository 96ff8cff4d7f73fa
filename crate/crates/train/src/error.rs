use std::path::PathBuf;

use thiserror::Error;

/// Errors raised while training, checkpointing or writing telemetry.
#[derive(Debug, Error)]
pub enum TrainError {
    #[error(transparent)]
    Tensor(#[from] scslab_tensor::TensorError),

    #[error(transparent)]
    Zoo(#[from] scslab_zoo::ZooError),

    #[error(transparent)]
    Data(#[from] scslab_data::DataError),

    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    /// A checkpoint file is malformed or incompatible with the model.
    #[error("checkpoint {path}: {detail}")]
    Checkpoint { path: PathBuf, detail: String },

    /// Training produced a non-finite value; names where it first appeared.
    #[error("non-finite value during training: {context}")]
    NonFinite { context: String },

    #[error("invalid training config: {0}")]
    Config(String),
}

impl TrainError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        TrainError::Io {
            path: path.into(),
            source,
        }
    }

    pub fn checkpoint(path: impl Into<PathBuf>, detail: impl Into<String>) -> Self {
        TrainError::Checkpoint {
            path: path.into(),
            detail: detail.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, TrainError>;
