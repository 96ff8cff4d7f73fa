//! Residual block with a parameter-free shortcut.

use scslab_nn::{
    adaptive_avgpool2d, ActivationKind, BatchNorm2d, FeatureLayer, ForwardMode, Layer,
};
use scslab_tensor::{Result, Tensor};

use crate::ops::pad_channels;

/// Two feature stages with optional normalization, joined to the input by
/// a shortcut. When the block changes resolution or width, the shortcut
/// average-pools to the new grid and zero-pads the new channels, so it
/// never adds parameters of its own.
pub struct ResidualBlock {
    name: String,
    f1: FeatureLayer,
    n1: Option<BatchNorm2d>,
    f2: FeatureLayer,
    n2: Option<BatchNorm2d>,
    act: &'static dyn ActivationKind,
}

impl ResidualBlock {
    pub fn new(
        name: impl Into<String>,
        f1: FeatureLayer,
        n1: Option<BatchNorm2d>,
        f2: FeatureLayer,
        n2: Option<BatchNorm2d>,
        act: &'static dyn ActivationKind,
    ) -> ResidualBlock {
        ResidualBlock {
            name: name.into(),
            f1,
            n1,
            f2,
            n2,
            act,
        }
    }

    fn child_list(&self) -> Vec<&dyn Layer> {
        let mut out: Vec<&dyn Layer> = vec![&self.f1];
        if let Some(n) = &self.n1 {
            out.push(n);
        }
        out.push(&self.f2);
        if let Some(n) = &self.n2 {
            out.push(n);
        }
        out
    }
}

/// Last dotted segment of a sublayer name, used to report params relative
/// to the block.
fn short_name(full: &str) -> &str {
    full.rsplit('.').next().unwrap_or(full)
}

impl Layer for ResidualBlock {
    fn layer_name(&self) -> &str {
        &self.name
    }

    fn forward(&self, x: &Tensor, mode: ForwardMode) -> Result<Tensor> {
        let mut h = self.f1.forward(x, mode)?;
        if let Some(n) = &self.n1 {
            h = n.forward(&h, mode)?;
        }
        h = self.act.apply(&h)?;
        h = self.f2.forward(&h, mode)?;
        if let Some(n) = &self.n2 {
            h = n.forward(&h, mode)?;
        }

        let (_, c_in, xh, xw) = x.dims4()?;
        let (_, c_out, oh, ow) = h.dims4()?;
        let mut s = x.clone();
        if xh != oh || xw != ow {
            s = adaptive_avgpool2d(&s, oh, ow)?;
        }
        if c_out > c_in {
            s = pad_channels(&s, c_out - c_in)?;
        }
        let joined = h.add(&s)?;
        self.act.apply(&joined)
    }

    fn params(&self) -> Vec<(String, Tensor)> {
        let mut out = Vec::new();
        for child in self.child_list() {
            let prefix = short_name(child.layer_name());
            for (pname, t) in child.params() {
                out.push((format!("{prefix}.{pname}"), t));
            }
        }
        out
    }

    fn buffers(&self) -> Vec<(String, Tensor)> {
        let mut out = Vec::new();
        for child in self.child_list() {
            let prefix = short_name(child.layer_name());
            for (bname, t) in child.buffers() {
                out.push((format!("{prefix}.{bname}"), t));
            }
        }
        out
    }

    fn children(&self) -> Vec<&dyn Layer> {
        self.child_list()
    }
}
