//! The layer abstraction models are composed of.

use scslab_tensor::{Result, Tensor};

use crate::convlike::{effective_p, effective_q, ConvLikeParams};
use crate::norm::BatchNorm2d;
use crate::pool::{adaptive_avgpool2d, flatten};
use crate::registry::{ActivationKind, FeatureKind, PoolKind};
use crate::dense::linear;

/// Whether a forward pass is part of training (batch statistics, running-
/// stat updates) or evaluation (frozen statistics, no side effects).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ForwardMode {
    Train,
    Eval,
}

/// One stage of a model: consumes an activation tensor, produces the next.
///
/// Layers expose their trainable parameters and persistent buffers as
/// named tensor handles so optimizers, checkpoints and telemetry can reach
/// them without knowing concrete layer types.
pub trait Layer {
    /// Instance name, unique within a model (e.g. `block2.features`).
    fn layer_name(&self) -> &str;

    fn forward(&self, x: &Tensor, mode: ForwardMode) -> Result<Tensor>;

    /// Trainable parameters as `(short_name, handle)` in declaration order.
    fn params(&self) -> Vec<(String, Tensor)> {
        Vec::new()
    }

    /// Persistent non-trainable state (e.g. running statistics).
    fn buffers(&self) -> Vec<(String, Tensor)> {
        Vec::new()
    }

    /// Nested sublayers for composite layers; leaves return empty.
    /// Composites still report their own `params`/`buffers` (covering
    /// the whole subtree), so walkers should use either the tree or the
    /// flat view, not both.
    fn children(&self) -> Vec<&dyn Layer> {
        Vec::new()
    }

    /// Effective sharpening exponents per output channel, if any.
    fn sharpness(&self) -> Option<Vec<f64>> {
        None
    }

    /// Effective smoothing scalar, if any.
    fn smoothing(&self) -> Option<f64> {
        None
    }
}

/// A conv-like feature extraction layer: one strategy plus its parameters.
pub struct FeatureLayer {
    name: String,
    kind: &'static dyn FeatureKind,
    pub params: ConvLikeParams,
}

impl FeatureLayer {
    pub fn new(
        name: impl Into<String>,
        kind: &'static dyn FeatureKind,
        params: ConvLikeParams,
    ) -> FeatureLayer {
        FeatureLayer {
            name: name.into(),
            kind,
            params,
        }
    }

    pub fn kind(&self) -> &'static dyn FeatureKind {
        self.kind
    }

    fn out_channels(&self) -> usize {
        self.params.weight.shape()[0]
    }
}

impl Layer for FeatureLayer {
    fn layer_name(&self) -> &str {
        &self.name
    }

    fn forward(&self, x: &Tensor, _mode: ForwardMode) -> Result<Tensor> {
        self.kind.forward(x, &self.params)
    }

    fn params(&self) -> Vec<(String, Tensor)> {
        let mut out = vec![("weight".to_string(), self.params.weight.clone())];
        if let Some(b) = &self.params.bias {
            out.push(("bias".to_string(), b.clone()));
        }
        if let Some(p) = &self.params.p_raw {
            out.push(("p_raw".to_string(), p.clone()));
        }
        if let Some(q) = &self.params.q_raw {
            out.push(("q_raw".to_string(), q.clone()));
        }
        out
    }

    fn sharpness(&self) -> Option<Vec<f64>> {
        if self.kind.uses_p() {
            effective_p(&self.params, self.out_channels()).ok()
        } else {
            None
        }
    }

    fn smoothing(&self) -> Option<f64> {
        if self.kind.uses_q() {
            effective_q(&self.params).ok()
        } else {
            None
        }
    }
}

/// Pointwise activation stage.
pub struct ActivationLayer {
    name: String,
    kind: &'static dyn ActivationKind,
}

impl ActivationLayer {
    pub fn new(name: impl Into<String>, kind: &'static dyn ActivationKind) -> ActivationLayer {
        ActivationLayer {
            name: name.into(),
            kind,
        }
    }
}

impl Layer for ActivationLayer {
    fn layer_name(&self) -> &str {
        &self.name
    }
    fn forward(&self, x: &Tensor, _mode: ForwardMode) -> Result<Tensor> {
        self.kind.apply(x)
    }
}

/// Spatial pooling stage.
pub struct PoolLayer {
    name: String,
    kind: &'static dyn PoolKind,
    window: usize,
    stride: usize,
}

impl PoolLayer {
    pub fn new(
        name: impl Into<String>,
        kind: &'static dyn PoolKind,
        window: usize,
        stride: usize,
    ) -> PoolLayer {
        PoolLayer {
            name: name.into(),
            kind,
            window,
            stride,
        }
    }
}

impl Layer for PoolLayer {
    fn layer_name(&self) -> &str {
        &self.name
    }
    fn forward(&self, x: &Tensor, _mode: ForwardMode) -> Result<Tensor> {
        self.kind.pool(x, self.window, self.stride)
    }
}

impl Layer for BatchNorm2d {
    fn layer_name(&self) -> &str {
        self.name()
    }
    fn forward(&self, x: &Tensor, mode: ForwardMode) -> Result<Tensor> {
        BatchNorm2d::forward(self, x, mode)
    }
    fn params(&self) -> Vec<(String, Tensor)> {
        vec![
            ("gamma".to_string(), self.gamma.clone()),
            ("beta".to_string(), self.beta.clone()),
        ]
    }
    fn buffers(&self) -> Vec<(String, Tensor)> {
        vec![
            ("running_mean".to_string(), self.running_mean.clone()),
            ("running_var".to_string(), self.running_var.clone()),
        ]
    }
}

/// Fully-connected classification head.
pub struct LinearLayer {
    name: String,
    pub weight: Tensor,
    pub bias: Tensor,
}

impl LinearLayer {
    pub fn new(name: impl Into<String>, weight: Tensor, bias: Tensor) -> LinearLayer {
        LinearLayer {
            name: name.into(),
            weight,
            bias,
        }
    }
}

impl Layer for LinearLayer {
    fn layer_name(&self) -> &str {
        &self.name
    }
    fn forward(&self, x: &Tensor, _mode: ForwardMode) -> Result<Tensor> {
        linear(x, &self.weight, &self.bias)
    }
    fn params(&self) -> Vec<(String, Tensor)> {
        vec![
            ("weight".to_string(), self.weight.clone()),
            ("bias".to_string(), self.bias.clone()),
        ]
    }
}

/// Average-pool to a fixed grid (usually 1x1 ahead of the head).
pub struct AvgPoolLayer {
    name: String,
    out_h: usize,
    out_w: usize,
}

impl AvgPoolLayer {
    pub fn new(name: impl Into<String>, out_h: usize, out_w: usize) -> AvgPoolLayer {
        AvgPoolLayer {
            name: name.into(),
            out_h,
            out_w,
        }
    }
}

impl Layer for AvgPoolLayer {
    fn layer_name(&self) -> &str {
        &self.name
    }
    fn forward(&self, x: &Tensor, _mode: ForwardMode) -> Result<Tensor> {
        adaptive_avgpool2d(x, self.out_h, self.out_w)
    }
}

/// Collapse spatial activations to a matrix for the head.
pub struct FlattenLayer {
    name: String,
}

impl FlattenLayer {
    pub fn new(name: impl Into<String>) -> FlattenLayer {
        FlattenLayer { name: name.into() }
    }
}

impl Layer for FlattenLayer {
    fn layer_name(&self) -> &str {
        &self.name
    }
    fn forward(&self, x: &Tensor, _mode: ForwardMode) -> Result<Tensor> {
        flatten(x)
    }
}
