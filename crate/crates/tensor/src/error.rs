use thiserror::Error;

/// Errors produced by tensor construction, shape manipulation and autodiff.
#[derive(Debug, Error)]
pub enum TensorError {
    /// Operand shapes are incompatible for the requested operation.
    #[error("shape mismatch in {op}: {detail}")]
    ShapeMismatch { op: &'static str, detail: String },

    /// A value is outside the mathematical domain of the operation.
    #[error("domain error in {op}: {detail}")]
    Domain { op: &'static str, detail: String },

    /// The operation was called on a tensor that cannot support it
    /// (e.g. backward on a non-scalar).
    #[error("usage error in {op}: {detail}")]
    Usage { op: &'static str, detail: String },

    /// A NaN or infinity was detected where finite values are required.
    #[error("non-finite value ({value}) at flat index {index} in tensor of shape {shape:?}")]
    NonFinite {
        value: f64,
        index: usize,
        shape: Vec<usize>,
    },
}

pub type Result<T> = std::result::Result<T, TensorError>;

impl TensorError {
    pub fn shape(op: &'static str, detail: impl Into<String>) -> Self {
        TensorError::ShapeMismatch {
            op,
            detail: detail.into(),
        }
    }

    pub fn domain(op: &'static str, detail: impl Into<String>) -> Self {
        TensorError::Domain {
            op,
            detail: detail.into(),
        }
    }

    pub fn usage(op: &'static str, detail: impl Into<String>) -> Self {
        TensorError::Usage {
            op,
            detail: detail.into(),
        }
    }
}
