//! Dense f64 tensors with dynamic reverse-mode automatic differentiation.
//!
//! The crate provides one tensor type, [`Tensor`], holding row-major `f64`
//! data. Operations build a define-by-run graph; calling
//! [`Tensor::backward`] on a scalar root runs one reverse sweep and leaves
//! gradients on every gradient-requiring leaf. Higher-level layer kernels
//! plug custom fused operations into the same graph through
//! [`Tensor::from_op`] / [`Tensor::from_op_shared`].
//!
//! Everything is f64 throughout: the numeric contracts downstream
//! (finite-difference audits at 1e-4, identity reductions at 1e-12,
//! byte-reproducible telemetry) are specified for 64-bit arithmetic.

mod error;
pub mod gemm;
mod ops;
mod tensor;

pub use error::{Result, TensorError};
pub use ops::BACKWARD_ABS_CLAMP;
pub use tensor::{BackwardFn, Tensor};
