//! L∞ projected-gradient-descent attacks and robustness sweeps.

use std::io::Write;
use std::path::Path;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use scslab_data::{Dataset, Standardizer, IMAGE_CHANNELS, IMAGE_PIXELS};
use scslab_nn::ForwardMode;
use scslab_tensor::Tensor;
use scslab_zoo::Model;

use crate::error::{AnalysisError, Result};

/// Attack schedule: L∞ budgets and inner-loop shape.
#[derive(Debug, Clone, PartialEq)]
pub struct AttackConfig {
    pub epsilons: Vec<f64>,
    pub steps: usize,
    /// Fixed per-iteration step length; `None` uses ε·2.5/steps.
    /// `Some(ε)` with `steps: 1` is single-step FGSM.
    pub step_size: Option<f64>,
    /// Start from a uniform point inside the ε-ball instead of the
    /// clean image.
    pub random_start: bool,
    /// Seed for the random start; unused otherwise.
    pub seed: u64,
}

impl Default for AttackConfig {
    fn default() -> AttackConfig {
        AttackConfig {
            epsilons: default_epsilons(),
            steps: 10,
            step_size: None,
            random_start: false,
            seed: 0,
        }
    }
}

impl AttackConfig {
    /// Per-iteration step length for a budget: the override if set,
    /// else ε·2.5/steps.
    pub fn effective_step_size(&self, eps: f64) -> f64 {
        self.step_size
            .unwrap_or_else(|| eps * 2.5 / self.steps as f64)
    }

    pub fn validate(&self) -> Result<()> {
        if self.steps == 0 {
            return Err(AnalysisError::Config("steps must be at least 1".into()));
        }
        if self.epsilons.is_empty() {
            return Err(AnalysisError::Config("no epsilons given".into()));
        }
        for &e in &self.epsilons {
            if !(e.is_finite() && e >= 0.0) {
                return Err(AnalysisError::Config(format!(
                    "epsilon must be finite and >= 0, got {e}"
                )));
            }
        }
        if let Some(s) = self.step_size {
            if !(s.is_finite() && s > 0.0) {
                return Err(AnalysisError::Config(format!(
                    "step_size override must be finite and > 0, got {s}"
                )));
            }
        }
        Ok(())
    }
}

/// Eight log-spaced budgets from 0.001 to 0.030, endpoints exact.
pub fn default_epsilons() -> Vec<f64> {
    log_spaced(0.001, 0.030, 8)
}

/// `n` log-spaced values from `lo` to `hi` inclusive, endpoints exact.
pub fn log_spaced(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    assert!(n >= 2 && lo > 0.0 && hi > lo);
    let (a, b) = (lo.ln(), hi.ln());
    (0..n)
        .map(|i| match i {
            0 => lo,
            _ if i == n - 1 => hi,
            _ => (a + (b - a) * i as f64 / (n - 1) as f64).exp(),
        })
        .collect()
}

/// Wraps a model as a raw-pixel-space forward pass: standardization (if
/// any) is applied inside, so callers and attacks work in `[0,1]` units.
pub fn standardized_forward<'a>(
    model: &'a Model,
    std: Option<&'a Standardizer>,
) -> impl Fn(&Tensor) -> Result<Tensor> + 'a {
    move |x: &Tensor| {
        let h = match std {
            Some(s) => standardize_tensor(x, s)?,
            None => x.clone(),
        };
        Ok(model.forward(&h, ForwardMode::Eval)?)
    }
}

fn standardize_tensor(x: &Tensor, s: &Standardizer) -> Result<Tensor> {
    let (b, c, hh, ww) = x.dims4()?;
    if c != IMAGE_CHANNELS {
        return Err(AnalysisError::Config(format!(
            "standardizer covers {IMAGE_CHANNELS} channels, input has {c}"
        )));
    }
    let plane = hh * ww;
    let mean = Tensor::from_fn(&[b, c, hh, ww], |i| s.mean[(i / plane) % c]);
    let sigma = Tensor::from_fn(&[b, c, hh, ww], |i| s.std[(i / plane) % c]);
    Ok(x.sub(&mean)?.div(&sigma)?)
}

fn attack_sign(g: f64) -> f64 {
    if g > 0.0 {
        1.0
    } else if g < 0.0 {
        -1.0
    } else {
        0.0
    }
}

fn pgd_core(
    forward: &dyn Fn(&Tensor) -> Result<Tensor>,
    batch: &Tensor,
    labels: &[usize],
    cfg: &AttackConfig,
    eps: f64,
    diagnose: &dyn Fn(&[f64]) -> Option<String>,
) -> Result<Tensor> {
    cfg.validate()?;
    if !(eps.is_finite() && eps >= 0.0) {
        return Err(AnalysisError::Config(format!(
            "epsilon must be finite and >= 0, got {eps}"
        )));
    }
    let shape = batch.shape().to_vec();
    if shape.first().copied() != Some(labels.len()) {
        return Err(AnalysisError::Config(format!(
            "batch of {:?} images with {} labels",
            shape.first(),
            labels.len()
        )));
    }
    let x0 = batch.data().clone();
    if x0.iter().any(|&v| !(0.0..=1.0).contains(&v)) {
        return Err(AnalysisError::Config(
            "attack inputs must lie in [0,1]".into(),
        ));
    }

    let mut cur = x0.clone();
    if cfg.random_start && eps > 0.0 {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        for (v, &o) in cur.iter_mut().zip(&x0) {
            *v = (o + rng.gen_range(-eps..=eps)).clamp(0.0, 1.0);
        }
    }
    let step = cfg.effective_step_size(eps);
    for it in 0..cfg.steps {
        let x = Tensor::param(cur.clone(), &shape)?;
        let logits = forward(&x)?;
        let loss = scslab_nn::cross_entropy_mean(&logits, labels)?;
        loss.backward()?;
        let g = x.grad().ok_or_else(|| AnalysisError::NonFinite {
            context: format!("attack step {}: input gradient missing", it + 1),
        })?;
        if g.iter().any(|v| !v.is_finite()) {
            let context = match diagnose(&cur) {
                Some(layer) => format!(
                    "attack step {}: non-finite input gradient; first non-finite \
                     output in layer '{layer}'",
                    it + 1
                ),
                None => format!("attack step {}: non-finite input gradient", it + 1),
            };
            return Err(AnalysisError::NonFinite { context });
        }
        for ((v, &o), &gi) in cur.iter_mut().zip(&x0).zip(&g) {
            let moved = *v + step * attack_sign(gi);
            *v = moved.clamp(o - eps, o + eps).clamp(0.0, 1.0);
        }
    }
    Ok(Tensor::from_vec(cur, &shape)?)
}

/// PGD against any differentiable forward map. The map must consume
/// raw `[0,1]` inputs; ε-ball and box projections are applied after
/// every step.
pub fn pgd_attack_with(
    forward: impl Fn(&Tensor) -> Result<Tensor>,
    batch: &Tensor,
    labels: &[usize],
    cfg: &AttackConfig,
    eps: f64,
) -> Result<Tensor> {
    pgd_core(&forward, batch, labels, cfg, eps, &|_| None)
}

/// PGD against a model, standardizing inside the attacked map when a
/// standardizer is given. A non-finite gradient aborts with the first
/// offending layer named.
pub fn pgd_attack(
    model: &Model,
    std: Option<&Standardizer>,
    batch: &Tensor,
    labels: &[usize],
    cfg: &AttackConfig,
    eps: f64,
) -> Result<Tensor> {
    let forward = standardized_forward(model, std);
    let shape = batch.shape().to_vec();
    let diagnose = |data: &[f64]| -> Option<String> {
        let x = Tensor::from_vec(data.to_vec(), &shape).ok()?;
        let h = match std {
            Some(s) => standardize_tensor(&x, s).ok()?,
            None => x,
        };
        let trace = model.forward_traced(&h, ForwardMode::Eval).ok()?;
        trace
            .iter()
            .find(|(_, t)| t.assert_finite().is_err())
            .map(|(name, _)| name.clone())
    };
    pgd_core(&forward, batch, labels, cfg, eps, &diagnose)
}

/// One point of a robustness curve.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepPoint {
    pub epsilon: f64,
    pub accuracy: f64,
    pub n_eval: usize,
}

/// Raw `[0,1]` batch plus labels from dataset records, in storage order.
pub fn raw_batch(ds: &Dataset, indices: &[usize]) -> Result<(Tensor, Vec<usize>)> {
    let b = indices.len();
    let mut buf = vec![0.0; b * IMAGE_PIXELS];
    for (slot, &i) in indices.iter().enumerate() {
        ds.write_image_into(i, &mut buf[slot * IMAGE_PIXELS..(slot + 1) * IMAGE_PIXELS]);
    }
    let x = Tensor::from_vec(buf, &[b, 3, 32, 32])?;
    let labels = indices.iter().map(|&i| ds.label(i) as usize).collect();
    Ok((x, labels))
}

/// Adversarial accuracy at every configured ε over a fixed dataset,
/// batched in storage order. Deterministic for a fixed config.
pub fn robustness_sweep(
    model: &Model,
    std: Option<&Standardizer>,
    ds: &Dataset,
    cfg: &AttackConfig,
    batch_size: usize,
) -> Result<Vec<SweepPoint>> {
    cfg.validate()?;
    if batch_size == 0 {
        return Err(AnalysisError::Config("batch_size must be at least 1".into()));
    }
    if ds.is_empty() {
        return Err(AnalysisError::Config(
            "cannot sweep over an empty dataset".into(),
        ));
    }
    let forward = standardized_forward(model, std);
    let indices: Vec<usize> = (0..ds.len()).collect();
    let mut points = Vec::with_capacity(cfg.epsilons.len());
    for &eps in &cfg.epsilons {
        let mut correct = 0.0;
        for chunk in indices.chunks(batch_size) {
            let (x, labels) = raw_batch(ds, chunk)?;
            let adv = pgd_attack(model, std, &x, &labels, cfg, eps)?;
            let logits = forward(&adv)?;
            correct += scslab_nn::accuracy(&logits, &labels)? * chunk.len() as f64;
        }
        points.push(SweepPoint {
            epsilon: eps,
            accuracy: correct / ds.len() as f64,
            n_eval: ds.len(),
        });
    }
    Ok(points)
}

/// Writes a sweep as CSV with header `epsilon,accuracy,n_eval`.
pub fn write_sweep_csv(path: impl AsRef<Path>, points: &[SweepPoint]) -> Result<()> {
    let path = path.as_ref();
    let file = std::fs::File::create(path).map_err(|e| AnalysisError::io(path, e))?;
    let mut out = std::io::BufWriter::new(file);
    let write = |out: &mut std::io::BufWriter<std::fs::File>, line: String| {
        writeln!(out, "{line}").map_err(|e| AnalysisError::io(path, e))
    };
    write(&mut out, "epsilon,accuracy,n_eval".into())?;
    for p in points {
        write(&mut out, format!("{},{},{}", p.epsilon, p.accuracy, p.n_eval))?;
    }
    out.flush().map_err(|e| AnalysisError::io(path, e))
}
