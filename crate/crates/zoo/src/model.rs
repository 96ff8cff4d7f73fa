//! A built model: an ordered stack of layers plus its descriptor.

use scslab_nn::{ForwardMode, Layer};
use scslab_tensor::Tensor;

use crate::build::{INPUT_CHANNELS, INPUT_SIDE, NUM_CLASSES};
use crate::config::LayerVariantConfig;
use crate::descriptor::{LayerInfo, ModelDescriptor};
use crate::error::Result;

pub struct Model {
    descriptor: ModelDescriptor,
    blocks: Vec<Box<dyn Layer>>,
    config: LayerVariantConfig,
}

impl std::fmt::Debug for Model {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Model")
            .field("variant", &self.descriptor.variant)
            .field("total_params", &self.descriptor.total_params)
            .finish()
    }
}

impl Model {
    /// Finalize a layer stack: runs a single-image shape probe to record
    /// per-layer output shapes and parameter counts in the descriptor.
    pub(crate) fn assemble(
        config: LayerVariantConfig,
        blocks: Vec<Box<dyn Layer>>,
    ) -> Result<Model> {
        let probe = Tensor::zeros(&[1, INPUT_CHANNELS, INPUT_SIDE, INPUT_SIDE]);
        let mut layers = Vec::with_capacity(blocks.len());
        let mut total = 0usize;
        let mut x = probe;
        for b in &blocks {
            x = b.forward(&x, ForwardMode::Eval)?;
            let param_count: usize = b.params().iter().map(|(_, t)| t.numel()).sum();
            total += param_count;
            layers.push(LayerInfo {
                name: b.layer_name().to_string(),
                kind: layer_kind_label(b.as_ref()),
                output_shape: x.shape()[1..].to_vec(),
                param_count,
            });
        }
        let mut flags = Vec::new();
        if config.layer_kind == "conv" && config.activation == "none" {
            flags.push(
                "conv features with no activation: stages compose near-linearly \
                 (degraded baseline)"
                    .to_string(),
            );
        }
        let descriptor = ModelDescriptor {
            arch_family: config.arch_family.clone(),
            variant: config.variant_string(),
            layers,
            total_params: total,
            input_shape: vec![INPUT_CHANNELS, INPUT_SIDE, INPUT_SIDE],
            num_classes: NUM_CLASSES,
            flags,
        };
        Ok(Model {
            descriptor,
            blocks,
            config,
        })
    }

    pub fn forward(&self, x: &Tensor, mode: ForwardMode) -> Result<Tensor> {
        let mut h = x.clone();
        for b in &self.blocks {
            h = b.forward(&h, mode)?;
        }
        Ok(h)
    }

    /// Like [`Model::forward`], but keeps every intermediate activation,
    /// named by the layer that produced it. Used to pinpoint the first
    /// layer that emits a non-finite value.
    pub fn forward_traced(&self, x: &Tensor, mode: ForwardMode) -> Result<Vec<(String, Tensor)>> {
        let mut h = x.clone();
        let mut trace = Vec::with_capacity(self.blocks.len());
        for b in &self.blocks {
            h = b.forward(&h, mode)?;
            trace.push((b.layer_name().to_string(), h.clone()));
        }
        Ok(trace)
    }

    /// All trainable parameters as `layer.param` dotted names, in
    /// architecture order. Handles share storage with the layers.
    pub fn named_params(&self) -> Vec<(String, Tensor)> {
        let mut out = Vec::new();
        for b in &self.blocks {
            for (pname, t) in b.params() {
                out.push((format!("{}.{}", b.layer_name(), pname), t));
            }
        }
        out
    }

    /// All persistent buffers (running statistics), dotted like params.
    pub fn named_buffers(&self) -> Vec<(String, Tensor)> {
        let mut out = Vec::new();
        for b in &self.blocks {
            for (bname, t) in b.buffers() {
                out.push((format!("{}.{}", b.layer_name(), bname), t));
            }
        }
        out
    }

    pub fn zero_grads(&self) {
        for (_, t) in self.named_params() {
            t.zero_grad();
        }
    }

    /// Top-level stack, in execution order.
    pub fn layers(&self) -> &[Box<dyn Layer>] {
        &self.blocks
    }

    /// Depth-first leaves of the layer tree (residual blocks unfolded),
    /// the granularity at which sharpness/smoothing are reported.
    pub fn leaf_layers(&self) -> Vec<&dyn Layer> {
        fn walk<'a>(l: &'a dyn Layer, out: &mut Vec<&'a dyn Layer>) {
            let kids = l.children();
            if kids.is_empty() {
                out.push(l);
            } else {
                for k in kids {
                    walk(k, out);
                }
            }
        }
        let mut out = Vec::new();
        for b in &self.blocks {
            walk(b.as_ref(), &mut out);
        }
        out
    }

    pub fn descriptor(&self) -> &ModelDescriptor {
        &self.descriptor
    }

    pub fn config(&self) -> &LayerVariantConfig {
        &self.config
    }

    pub fn param_count(&self) -> usize {
        self.descriptor.total_params
    }
}

fn layer_kind_label(l: &dyn Layer) -> String {
    // The descriptor wants a coarse role label; infer it from what the
    // layer exposes rather than downcasting.
    let has_params = !l.params().is_empty();
    let has_buffers = !l.buffers().is_empty();
    let composite = !l.children().is_empty();
    if composite {
        "residual".to_string()
    } else if has_buffers {
        "norm".to_string()
    } else if l.sharpness().is_some() || l.smoothing().is_some() {
        "feature".to_string()
    } else if has_params {
        // feature layers without p/q (conv) and the linear head both
        // carry weight+bias; tell them apart by parameter rank
        let w = &l.params()[0].1;
        if w.ndim() == 4 {
            "feature".to_string()
        } else {
            "linear".to_string()
        }
    } else {
        "stateless".to_string()
    }
}
