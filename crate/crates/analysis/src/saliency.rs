//! Vanilla-gradient saliency maps and their PGM/sidecar output.

use std::io::Write;
use std::path::Path;

use scslab_data::Standardizer;
use scslab_tensor::Tensor;
use scslab_zoo::Model;

use crate::attack::standardized_forward;
use crate::error::{AnalysisError, Result};
use crate::sparsity::sparsity_index;

/// How per-channel input gradients collapse to one value per pixel.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SaliencyReduce {
    /// Maximum of absolute gradients over channels (default).
    MaxAbs,
    /// Mean of absolute gradients over channels.
    MeanAbs,
}

impl SaliencyReduce {
    pub fn name(self) -> &'static str {
        match self {
            SaliencyReduce::MaxAbs => "max_abs",
            SaliencyReduce::MeanAbs => "mean_abs",
        }
    }
}

/// Per-pixel attribution of one class logit, max-normalized to [0,1].
#[derive(Debug, Clone, PartialEq)]
pub struct SaliencyMap {
    /// Row-major (H,W) attributions in [0,1].
    pub grid: Vec<f64>,
    pub height: usize,
    pub width: usize,
    pub image_id: usize,
    pub class_idx: usize,
    /// The attributed logit's value on this image.
    pub logit: f64,
    pub reduce: SaliencyReduce,
    /// Normalization tag; always "max" (zero maps stay zero).
    pub normalization: &'static str,
}

/// Saliency of `class_idx`'s logit under any differentiable forward
/// map. The input must be a single image shaped `(1,C,H,W)`.
pub fn saliency_map_with(
    forward: impl Fn(&Tensor) -> Result<Tensor>,
    image: &Tensor,
    image_id: usize,
    class_idx: usize,
    reduce: SaliencyReduce,
) -> Result<SaliencyMap> {
    let (b, c, h, w) = image.dims4()?;
    if b != 1 {
        return Err(AnalysisError::Config(format!(
            "saliency expects a single image, got batch of {b}"
        )));
    }
    let x = Tensor::param(image.data().clone(), &[1, c, h, w])?;
    let logits = forward(&x)?;
    let k = logits.shape().iter().product::<usize>();
    if class_idx >= k {
        return Err(AnalysisError::Config(format!(
            "class {class_idx} out of range for {k} logits"
        )));
    }
    let target = logits.reshape(&[1, k])?.narrow(1, class_idx, 1)?;
    let logit = target.item()?;
    if !logit.is_finite() {
        return Err(AnalysisError::NonFinite {
            context: format!("logit {class_idx} on image {image_id}"),
        });
    }
    target.backward()?;
    let g = x.grad().ok_or_else(|| AnalysisError::NonFinite {
        context: format!("input gradient missing on image {image_id}"),
    })?;
    if g.iter().any(|v| !v.is_finite()) {
        return Err(AnalysisError::NonFinite {
            context: format!("input gradient on image {image_id}"),
        });
    }

    let plane = h * w;
    let mut grid = vec![0.0; plane];
    for (pix, cell) in grid.iter_mut().enumerate() {
        let per_channel = (0..c).map(|ch| g[ch * plane + pix].abs());
        *cell = match reduce {
            SaliencyReduce::MaxAbs => per_channel.fold(0.0, f64::max),
            SaliencyReduce::MeanAbs => per_channel.sum::<f64>() / c as f64,
        };
    }
    let peak = grid.iter().fold(0.0, |a: f64, &b| a.max(b));
    if peak > 0.0 {
        for v in &mut grid {
            *v /= peak;
        }
    }
    Ok(SaliencyMap {
        grid,
        height: h,
        width: w,
        image_id,
        class_idx,
        logit,
        reduce,
        normalization: "max",
    })
}

/// Saliency against a model, standardizing inside the differentiated
/// map when a standardizer is given, so attributions are in raw-pixel
/// units.
pub fn saliency_map(
    model: &Model,
    std: Option<&Standardizer>,
    image: &Tensor,
    image_id: usize,
    class_idx: usize,
    reduce: SaliencyReduce,
) -> Result<SaliencyMap> {
    saliency_map_with(
        standardized_forward(model, std),
        image,
        image_id,
        class_idx,
        reduce,
    )
}

/// Writes the map as a binary PGM (`P5`, maxval 255).
pub fn write_pgm(path: impl AsRef<Path>, map: &SaliencyMap) -> Result<()> {
    let path = path.as_ref();
    let mut bytes = format!("P5\n{} {}\n255\n", map.width, map.height).into_bytes();
    bytes.extend(map.grid.iter().map(|&v| (v.clamp(0.0, 1.0) * 255.0).round() as u8));
    std::fs::write(path, bytes).map_err(|e| AnalysisError::io(path, e))
}

/// Writes the companion text file: image id, class, logit, sparsity,
/// reduction, normalization.
pub fn write_sidecar(path: impl AsRef<Path>, map: &SaliencyMap) -> Result<()> {
    let path = path.as_ref();
    let file = std::fs::File::create(path).map_err(|e| AnalysisError::io(path, e))?;
    let mut out = std::io::BufWriter::new(file);
    let body = format!(
        "image_id: {}\nclass: {}\nlogit: {}\nsparsity: {}\nreduction: {}\nnormalization: {}\n",
        map.image_id,
        map.class_idx,
        map.logit,
        sparsity_index(map),
        map.reduce.name(),
        map.normalization,
    );
    out.write_all(body.as_bytes())
        .map_err(|e| AnalysisError::io(path, e))?;
    out.flush().map_err(|e| AnalysisError::io(path, e))
}
