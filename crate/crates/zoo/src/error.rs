use thiserror::Error;

/// Errors raised while resolving a variant config into a model.
#[derive(Debug, Error)]
pub enum ZooError {
    /// A strategy or architecture name is not registered.
    #[error("unknown {what} '{name}'; known: {known:?}")]
    UnknownName {
        what: &'static str,
        name: String,
        known: Vec<&'static str>,
    },

    /// The config is structurally invalid (bad combination or value).
    #[error("invalid model config: {0}")]
    Config(String),

    /// An underlying tensor operation failed.
    #[error(transparent)]
    Tensor(#[from] scslab_tensor::TensorError),
}

pub type Result<T> = std::result::Result<T, ZooError>;
