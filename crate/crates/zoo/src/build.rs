//! Model assembly: turns a [`LayerVariantConfig`] into a [`Model`].
//!
//! Weight initialization is keyed only by `(seed, layer ordinal)`, never by
//! the feature kind, so swapping `conv` for `scs` (or any other kind) on the
//! same seed starts from byte-identical kernels. That makes cross-kind
//! comparisons a property of the layer formula, not of the random draw.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use scslab_nn::{
    activation, activation_names, feature_kind, feature_kind_names, normalization,
    normalization_names, pooling, pooling_names, softplus_inv, ActivationKind, ActivationLayer,
    AvgPoolLayer, BatchNorm2d, ConvLikeParams, FeatureKind, FeatureLayer, FlattenLayer, Layer,
    LinearLayer, NormKind, PMode, PoolKind, PoolLayer, QMode,
};
use scslab_tensor::Tensor;

use crate::block::ResidualBlock;
use crate::config::LayerVariantConfig;
use crate::error::{Result, ZooError};
use crate::model::Model;

pub const INPUT_CHANNELS: usize = 3;
pub const INPUT_SIDE: usize = 32;
pub const NUM_CLASSES: usize = 10;

/// Initial smoothing value for learned-q layers.
pub const INIT_Q: f64 = 0.1;

/// Stage widths for the two plain families.
const SMALL_WIDTHS: [usize; 3] = [16, 32, 64];
const WIDE_WIDTHS: [usize; 3] = [48, 72, 112];
/// Stage widths for the residual family.
const RESNET_WIDTHS: [usize; 3] = [16, 32, 64];

/// Resolved strategy handles plus an ordinal counter for weight draws.
struct Assembler {
    kind: &'static dyn FeatureKind,
    act: &'static dyn ActivationKind,
    pool: &'static dyn PoolKind,
    norm: &'static dyn NormKind,
    p_mode: PMode,
    q_mode: QMode,
    seed: u64,
    next_ordinal: u64,
}

impl Assembler {
    fn resolve(cfg: &LayerVariantConfig) -> Result<Assembler> {
        let kind = feature_kind(&cfg.layer_kind).ok_or_else(|| ZooError::UnknownName {
            what: "feature kind",
            name: cfg.layer_kind.clone(),
            known: feature_kind_names(),
        })?;
        let act = activation(&cfg.activation).ok_or_else(|| ZooError::UnknownName {
            what: "activation",
            name: cfg.activation.clone(),
            known: activation_names(),
        })?;
        let pool = pooling(&cfg.pooling).ok_or_else(|| ZooError::UnknownName {
            what: "pooling",
            name: cfg.pooling.clone(),
            known: pooling_names(),
        })?;
        let norm = normalization(&cfg.normalization).ok_or_else(|| ZooError::UnknownName {
            what: "normalization",
            name: cfg.normalization.clone(),
            known: normalization_names(),
        })?;
        if let PMode::Fixed(v) = cfg.p_mode {
            if v <= 0.0 {
                return Err(ZooError::Config(format!(
                    "fixed sharpening exponent must be > 0, got {v}"
                )));
            }
        }
        if let QMode::Fixed(v) = cfg.q_mode {
            if v < 0.0 {
                return Err(ZooError::Config(format!(
                    "fixed smoothing term must be >= 0, got {v}"
                )));
            }
        }
        Ok(Assembler {
            kind,
            act,
            pool,
            norm,
            p_mode: cfg.p_mode,
            q_mode: cfg.q_mode,
            seed: cfg.seed,
            next_ordinal: 0,
        })
    }

    /// One independent RNG stream per weight-bearing layer, in
    /// architecture order. Streams decouple the draws so layer k's
    /// weights do not depend on how many values earlier layers consumed.
    fn next_rng(&mut self) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(self.next_ordinal);
        self.next_ordinal += 1;
        rng
    }

    /// Uniform(-a, a) with a = 1/sqrt(fan_in).
    fn draw_weight(&mut self, shape: &[usize], fan_in: usize) -> Result<Tensor> {
        let a = 1.0 / (fan_in as f64).sqrt();
        let mut rng = self.next_rng();
        let n: usize = shape.iter().product();
        let data: Vec<f64> = (0..n).map(|_| rng.gen_range(-a..a)).collect();
        Ok(Tensor::param(data, shape)?)
    }

    fn feature(
        &mut self,
        name: &str,
        in_c: usize,
        out_c: usize,
        kernel: usize,
        stride: usize,
        padding: usize,
    ) -> Result<FeatureLayer> {
        let weight = self.draw_weight(&[out_c, in_c, kernel, kernel], in_c * kernel * kernel)?;
        let bias = if self.kind.uses_bias() {
            Some(Tensor::param(vec![0.0; out_c], &[out_c])?)
        } else {
            None
        };
        // Kinds that don't sharpen/smooth get inert fixed values; the
        // config's modes only apply where the formula has the knob.
        let (p_mode, p_raw) = if self.kind.uses_p() {
            match self.p_mode {
                PMode::Learned => (
                    PMode::Learned,
                    Some(Tensor::param(vec![0.0; out_c], &[out_c])?),
                ),
                PMode::Fixed(v) => (PMode::Fixed(v), None),
            }
        } else {
            (PMode::Fixed(1.0), None)
        };
        let (q_mode, q_raw) = if self.kind.uses_q() {
            match self.q_mode {
                QMode::Learned => (
                    QMode::Learned,
                    Some(Tensor::param(vec![softplus_inv(INIT_Q)], &[1])?),
                ),
                QMode::Fixed(v) => (QMode::Fixed(v), None),
            }
        } else {
            (QMode::Fixed(0.0), None)
        };
        let params = ConvLikeParams {
            weight,
            bias,
            p_raw,
            q_raw,
            p_mode,
            q_mode,
            stride,
            padding,
        };
        Ok(FeatureLayer::new(name, self.kind, params))
    }

    fn linear_head(&mut self, name: &str, in_features: usize, classes: usize) -> Result<LinearLayer> {
        let weight = self.draw_weight(&[classes, in_features], in_features)?;
        let bias = Tensor::param(vec![0.0; classes], &[classes])?;
        Ok(LinearLayer::new(name, weight, bias))
    }

    fn norm_for(&self, name: &str, channels: usize) -> Option<BatchNorm2d> {
        self.norm.build(name.to_string(), channels)
    }
}

/// Build the model a config describes. Fails on unknown strategy names or
/// out-of-domain fixed parameter values.
pub fn build_model(cfg: &LayerVariantConfig) -> Result<Model> {
    let mut asm = Assembler::resolve(cfg)?;
    let blocks: Vec<Box<dyn Layer>> = match cfg.arch_family.as_str() {
        "rohrer_small" => plain_stack(&mut asm, SMALL_WIDTHS)?,
        "rohrer_100k" => plain_stack(&mut asm, WIDE_WIDTHS)?,
        "mini_resnet" => residual_stack(&mut asm)?,
        other => {
            return Err(ZooError::UnknownName {
                what: "architecture family",
                name: other.to_string(),
                known: crate::config::ARCH_FAMILIES.to_vec(),
            })
        }
    };
    Model::assemble(cfg.clone(), blocks)
}

/// Three feature stages (3x3, stride 1, pad 1) each followed by optional
/// normalization, activation, and a 2x2 stride-2 pool, then a
/// global-average + linear head. Spatial path: 32 -> 16 -> 8 -> 4 -> 1.
fn plain_stack(asm: &mut Assembler, widths: [usize; 3]) -> Result<Vec<Box<dyn Layer>>> {
    let mut blocks: Vec<Box<dyn Layer>> = Vec::new();
    let mut in_c = INPUT_CHANNELS;
    for (i, &out_c) in widths.iter().enumerate() {
        let n = i + 1;
        blocks.push(Box::new(asm.feature(
            &format!("features{n}"),
            in_c,
            out_c,
            3,
            1,
            1,
        )?));
        if let Some(bn) = asm.norm_for(&format!("norm{n}"), out_c) {
            blocks.push(Box::new(bn));
        }
        blocks.push(Box::new(ActivationLayer::new(format!("act{n}"), asm.act)));
        blocks.push(Box::new(PoolLayer::new(format!("pool{n}"), asm.pool, 2, 2)));
        in_c = out_c;
    }
    blocks.push(Box::new(AvgPoolLayer::new("avgpool", 1, 1)));
    blocks.push(Box::new(FlattenLayer::new("flatten")));
    blocks.push(Box::new(asm.linear_head("head", widths[2], NUM_CLASSES)?));
    Ok(blocks)
}

/// Stem + three residual stages of two blocks each, widths 16/32/64, the
/// first block of stages 2 and 3 downsampling by stride 2.
/// Spatial path: 32 -> 16 (stem pool) -> 8 -> 4 -> 1.
fn residual_stack(asm: &mut Assembler) -> Result<Vec<Box<dyn Layer>>> {
    let mut blocks: Vec<Box<dyn Layer>> = Vec::new();
    blocks.push(Box::new(asm.feature(
        "stem",
        INPUT_CHANNELS,
        RESNET_WIDTHS[0],
        3,
        1,
        1,
    )?));
    if let Some(bn) = asm.norm_for("stem_norm", RESNET_WIDTHS[0]) {
        blocks.push(Box::new(bn));
    }
    blocks.push(Box::new(ActivationLayer::new("stem_act", asm.act)));
    blocks.push(Box::new(PoolLayer::new("stem_pool", asm.pool, 2, 2)));

    let mut in_c = RESNET_WIDTHS[0];
    for (stage, &out_c) in RESNET_WIDTHS.iter().enumerate() {
        let s = stage + 1;
        for b in 1..=2 {
            let name = format!("s{s}b{b}");
            let stride = if s > 1 && b == 1 { 2 } else { 1 };
            let f1 = asm.feature(&format!("{name}.f1"), in_c, out_c, 3, stride, 1)?;
            let n1 = asm.norm_for(&format!("{name}.n1"), out_c);
            let f2 = asm.feature(&format!("{name}.f2"), out_c, out_c, 3, 1, 1)?;
            let n2 = asm.norm_for(&format!("{name}.n2"), out_c);
            blocks.push(Box::new(ResidualBlock::new(name, f1, n1, f2, n2, asm.act)));
            in_c = out_c;
        }
    }
    blocks.push(Box::new(AvgPoolLayer::new("avgpool", 1, 1)));
    blocks.push(Box::new(FlattenLayer::new("flatten")));
    blocks.push(Box::new(asm.linear_head("head", RESNET_WIDTHS[2], NUM_CLASSES)?));
    Ok(blocks)
}
