use std::path::PathBuf;

use thiserror::Error;

/// Errors raised by dataset loading, writing and slicing.
#[derive(Debug, Error)]
pub enum DataError {
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    /// A binary record file violates the format contract.
    #[error("{path}: {detail} (byte offset {offset})")]
    Format {
        path: PathBuf,
        offset: u64,
        detail: String,
    },

    /// A request is inconsistent with the dataset's contents.
    #[error("invalid data request: {0}")]
    Config(String),
}

impl DataError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        DataError::Io {
            path: path.into(),
            source,
        }
    }

    pub fn format(path: impl Into<PathBuf>, offset: u64, detail: impl Into<String>) -> Self {
        DataError::Format {
            path: path.into(),
            offset,
            detail: detail.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, DataError>;
