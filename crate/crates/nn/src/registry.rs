//! Name-keyed strategy registries for the interchangeable pieces of a
//! model: feature extractor kind, activation, pooling rule, normalization.
//!
//! Each variant is a unit struct implementing the strategy trait and is
//! registered in one slice entry; configs select variants by string name
//! at runtime. Adding a new variant means implementing the trait and
//! adding one line to the corresponding registry slice.

use scslab_tensor::{Result, Tensor};

use crate::convlike::{conv2d, cossim2d, scs2d, sdp2d, ConvLikeParams};
use crate::norm::BatchNorm2d;
use crate::pool::{maxabspool2d, maxpool2d};

/// A conv-like feature extractor: how patch responses are computed.
pub trait FeatureKind: Sync {
    fn kind_name(&self) -> &'static str;
    fn uses_bias(&self) -> bool;
    fn uses_p(&self) -> bool;
    fn uses_q(&self) -> bool;
    fn forward(&self, x: &Tensor, params: &ConvLikeParams) -> Result<Tensor>;
}

pub struct ConvFeature;
impl FeatureKind for ConvFeature {
    fn kind_name(&self) -> &'static str {
        "conv"
    }
    fn uses_bias(&self) -> bool {
        true
    }
    fn uses_p(&self) -> bool {
        false
    }
    fn uses_q(&self) -> bool {
        false
    }
    fn forward(&self, x: &Tensor, params: &ConvLikeParams) -> Result<Tensor> {
        conv2d(x, params)
    }
}

pub struct CosSimFeature;
impl FeatureKind for CosSimFeature {
    fn kind_name(&self) -> &'static str {
        "cossim"
    }
    fn uses_bias(&self) -> bool {
        false
    }
    fn uses_p(&self) -> bool {
        false
    }
    fn uses_q(&self) -> bool {
        true
    }
    fn forward(&self, x: &Tensor, params: &ConvLikeParams) -> Result<Tensor> {
        cossim2d(x, params)
    }
}

pub struct ScsFeature;
impl FeatureKind for ScsFeature {
    fn kind_name(&self) -> &'static str {
        "scs"
    }
    fn uses_bias(&self) -> bool {
        false
    }
    fn uses_p(&self) -> bool {
        true
    }
    fn uses_q(&self) -> bool {
        true
    }
    fn forward(&self, x: &Tensor, params: &ConvLikeParams) -> Result<Tensor> {
        scs2d(x, params)
    }
}

pub struct SdpFeature;
impl FeatureKind for SdpFeature {
    fn kind_name(&self) -> &'static str {
        "sdp"
    }
    fn uses_bias(&self) -> bool {
        false
    }
    fn uses_p(&self) -> bool {
        true
    }
    fn uses_q(&self) -> bool {
        false
    }
    fn forward(&self, x: &Tensor, params: &ConvLikeParams) -> Result<Tensor> {
        sdp2d(x, params)
    }
}

static FEATURE_KINDS: &[&dyn FeatureKind] =
    &[&ConvFeature, &CosSimFeature, &ScsFeature, &SdpFeature];

/// Look up a feature-extractor strategy by name.
pub fn feature_kind(name: &str) -> Option<&'static dyn FeatureKind> {
    FEATURE_KINDS.iter().copied().find(|k| k.kind_name() == name)
}

/// All registered feature-extractor names, in registration order.
pub fn feature_kind_names() -> Vec<&'static str> {
    FEATURE_KINDS.iter().map(|k| k.kind_name()).collect()
}

/// Pointwise activation applied after a feature extractor.
pub trait ActivationKind: Sync {
    fn activation_name(&self) -> &'static str;
    fn apply(&self, x: &Tensor) -> Result<Tensor>;
}

pub struct ReluActivation;
impl ActivationKind for ReluActivation {
    fn activation_name(&self) -> &'static str {
        "relu"
    }
    fn apply(&self, x: &Tensor) -> Result<Tensor> {
        Ok(x.relu())
    }
}

pub struct NoActivation;
impl ActivationKind for NoActivation {
    fn activation_name(&self) -> &'static str {
        "none"
    }
    fn apply(&self, x: &Tensor) -> Result<Tensor> {
        Ok(x.clone())
    }
}

static ACTIVATIONS: &[&dyn ActivationKind] = &[&ReluActivation, &NoActivation];

/// Look up an activation strategy by name.
pub fn activation(name: &str) -> Option<&'static dyn ActivationKind> {
    ACTIVATIONS
        .iter()
        .copied()
        .find(|a| a.activation_name() == name)
}

/// All registered activation names, in registration order.
pub fn activation_names() -> Vec<&'static str> {
    ACTIVATIONS.iter().map(|a| a.activation_name()).collect()
}

/// Spatial downsampling rule.
pub trait PoolKind: Sync {
    fn pool_name(&self) -> &'static str;
    fn pool(&self, x: &Tensor, window: usize, stride: usize) -> Result<Tensor>;
}

pub struct MaxPool;
impl PoolKind for MaxPool {
    fn pool_name(&self) -> &'static str {
        "maxpool"
    }
    fn pool(&self, x: &Tensor, window: usize, stride: usize) -> Result<Tensor> {
        maxpool2d(x, window, stride)
    }
}

pub struct MaxAbsPool;
impl PoolKind for MaxAbsPool {
    fn pool_name(&self) -> &'static str {
        "maxabspool"
    }
    fn pool(&self, x: &Tensor, window: usize, stride: usize) -> Result<Tensor> {
        maxabspool2d(x, window, stride)
    }
}

static POOLINGS: &[&dyn PoolKind] = &[&MaxPool, &MaxAbsPool];

/// Look up a pooling strategy by name.
pub fn pooling(name: &str) -> Option<&'static dyn PoolKind> {
    POOLINGS.iter().copied().find(|p| p.pool_name() == name)
}

/// All registered pooling names, in registration order.
pub fn pooling_names() -> Vec<&'static str> {
    POOLINGS.iter().map(|p| p.pool_name()).collect()
}

/// Normalization inserted after a feature extractor. Builders return
/// `None` when the strategy is "no normalization".
pub trait NormKind: Sync {
    fn norm_name(&self) -> &'static str;
    fn build(&self, layer_name: String, channels: usize) -> Option<BatchNorm2d>;
}

pub struct BatchNormStrategy;
impl NormKind for BatchNormStrategy {
    fn norm_name(&self) -> &'static str {
        "batchnorm"
    }
    fn build(&self, layer_name: String, channels: usize) -> Option<BatchNorm2d> {
        Some(BatchNorm2d::new(layer_name, channels))
    }
}

pub struct NoNorm;
impl NormKind for NoNorm {
    fn norm_name(&self) -> &'static str {
        "none"
    }
    fn build(&self, _layer_name: String, _channels: usize) -> Option<BatchNorm2d> {
        None
    }
}

static NORMALIZATIONS: &[&dyn NormKind] = &[&BatchNormStrategy, &NoNorm];

/// Look up a normalization strategy by name.
pub fn normalization(name: &str) -> Option<&'static dyn NormKind> {
    NORMALIZATIONS
        .iter()
        .copied()
        .find(|n| n.norm_name() == name)
}

/// All registered normalization names, in registration order.
pub fn normalization_names() -> Vec<&'static str> {
    NORMALIZATIONS.iter().map(|n| n.norm_name()).collect()
}
