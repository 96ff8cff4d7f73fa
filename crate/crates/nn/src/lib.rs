//! Neural layer kernels built on the autodiff tensor.
//!
//! The centerpiece is a family of interchangeable conv-like feature
//! extractors (plain convolution, smoothed cosine similarity, sharpened
//! cosine similarity, and sharpened raw dot product) sharing one fused
//! im2col + GEMM engine with analytic backward passes. Around them sit the
//! supporting stages: max / max-absolute / average pooling, batch
//! normalization, a dense head, and the cross-entropy loss.
//!
//! Strategy selection is name-based: [`registry`] maps config strings to
//! trait objects for feature kind, activation, pooling and normalization,
//! and [`layer::Layer`] is the uniform interface models compose.

pub mod convlike;
pub mod dense;
pub mod im2col;
pub mod layer;
pub mod norm;
pub mod patch;
pub mod pool;
pub mod registry;

pub use convlike::{
    conv2d, cossim2d, effective_p, effective_q, scs2d, sdp2d, sigmoid, softplus,
    softplus_inv, ConvLikeParams, PMode, QMode,
};
pub use dense::{accuracy, cross_entropy_mean, linear, softmax_rows};
pub use im2col::{col2im_accumulate, im2col, ConvGeometry};
pub use layer::{
    ActivationLayer, AvgPoolLayer, FeatureLayer, FlattenLayer, ForwardMode, Layer,
    LinearLayer, PoolLayer,
};
pub use norm::BatchNorm2d;
pub use pool::{adaptive_avgpool2d, flatten, maxabspool2d, maxpool2d};
pub use registry::{
    activation, activation_names, feature_kind, feature_kind_names, normalization,
    normalization_names, pooling, pooling_names, ActivationKind, FeatureKind, NormKind,
    PoolKind,
};
