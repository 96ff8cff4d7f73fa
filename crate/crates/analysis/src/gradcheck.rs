//! Central finite-difference audit of every backward pass.
//!
//! Each op is checked on randomized instances whose inputs are kept
//! away from the op's non-smooth set: relu inputs are bounded away
//! from 0, pooling windows are resampled until the top two (absolute)
//! values are separated, and the feature similarities are resampled
//! away from the sign kink. Tie points are excluded by construction,
//! not special-cased in the backward passes.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use scslab_nn::{
    conv2d, cossim2d, cross_entropy_mean, linear, maxabspool2d, maxpool2d, scs2d, sdp2d,
    softplus_inv, BatchNorm2d, ConvLikeParams, ForwardMode, PMode, QMode,
};
use scslab_tensor::Tensor;

use crate::error::{AnalysisError, Result};

/// Pass threshold for the suite's max relative error.
pub const GRADCHECK_TOL: f64 = 1e-4;
/// Central-difference step.
const FD_H: f64 = 1e-5;
/// Relative-error denominator floor, so near-zero gradients are
/// compared on an absolute scale that still exposes real defects.
const REL_FLOOR: f64 = 1e-3;

#[derive(Debug, Clone, PartialEq)]
pub struct OpReport {
    pub op: String,
    pub instances: usize,
    pub max_rel_err: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    pub per_op: Vec<OpReport>,
}

impl GradCheckReport {
    pub fn max_rel_err(&self) -> f64 {
        self.per_op.iter().fold(0.0, |a, r| a.max(r.max_rel_err))
    }

    pub fn all_within(&self, tol: f64) -> bool {
        self.per_op.iter().all(|r| r.max_rel_err < tol)
    }

    /// One line per op: name, instance count, max error, verdict.
    pub fn render(&self, tol: f64) -> String {
        let mut out = String::new();
        for r in &self.per_op {
            let verdict = if r.max_rel_err < tol { "ok" } else { "FAIL" };
            out.push_str(&format!(
                "{:<18} instances={:<3} max_rel_err={:.3e}  {}\n",
                r.op, r.instances, r.max_rel_err, verdict
            ));
        }
        out.push_str(&format!(
            "overall max_rel_err={:.3e} (tolerance {tol:.0e})\n",
            self.max_rel_err()
        ));
        out
    }
}

/// The audited ops, in report order.
pub fn op_names() -> Vec<&'static str> {
    vec![
        "conv2d",
        "cossim2d",
        "scs2d",
        "sdp2d",
        "linear",
        "relu",
        "maxpool2d",
        "maxabspool2d",
        "batchnorm2d",
        "cross_entropy",
    ]
}

type LossFn = Box<dyn Fn() -> Result<Tensor>>;

struct Instance {
    params: Vec<Tensor>,
    loss: LossFn,
}

/// Max relative error between analytic and central finite-difference
/// gradients over every parameter entry of one instance.
fn check_instance(inst: &Instance) -> Result<f64> {
    for p in &inst.params {
        p.zero_grad();
    }
    let loss = (inst.loss)()?;
    loss.backward()?;
    let analytic: Vec<Vec<f64>> = inst
        .params
        .iter()
        .map(|p| p.grad().unwrap_or_else(|| vec![0.0; p.data().len()]))
        .collect();

    let mut max_rel: f64 = 0.0;
    for (pi, p) in inst.params.iter().enumerate() {
        let base = p.data().clone();
        for j in 0..base.len() {
            let mut bumped = base.clone();
            bumped[j] = base[j] + FD_H;
            p.set_data(&bumped)?;
            let f_plus = (inst.loss)()?.item()?;
            bumped[j] = base[j] - FD_H;
            p.set_data(&bumped)?;
            let f_minus = (inst.loss)()?.item()?;
            p.set_data(&base)?;
            let fd = (f_plus - f_minus) / (2.0 * FD_H);
            let a = analytic[pi][j];
            if !(fd.is_finite() && a.is_finite()) {
                return Err(AnalysisError::NonFinite {
                    context: format!("gradcheck entry {j} of parameter {pi}"),
                });
            }
            let rel = (a - fd).abs() / a.abs().max(fd.abs()).max(REL_FLOOR);
            max_rel = max_rel.max(rel);
        }
    }
    Ok(max_rel)
}

fn uniform(rng: &mut ChaCha8Rng, shape: &[usize], lo: f64, hi: f64) -> Vec<f64> {
    let n: usize = shape.iter().product();
    (0..n).map(|_| rng.gen_range(lo..hi)).collect()
}

fn param(rng: &mut ChaCha8Rng, shape: &[usize], lo: f64, hi: f64) -> Tensor {
    Tensor::param(uniform(rng, shape, lo, hi), shape).expect("valid shape")
}

fn constant(rng: &mut ChaCha8Rng, shape: &[usize]) -> Tensor {
    Tensor::from_vec(uniform(rng, shape, -1.0, 1.0), shape).expect("valid shape")
}

/// Scalar objective: random-weighted sum of all outputs, probing the
/// full Jacobian.
fn weighted_sum(y: &Tensor, w: &Tensor) -> Result<Tensor> {
    Ok(y.mul(w)?.sum())
}

/// True when every pooling window's top two candidate values are
/// separated by at least `gap` (candidates = raw values for maxpool,
/// magnitudes for maxabspool).
fn windows_separated(x: &[f64], side: usize, window: usize, by_abs: bool, gap: f64) -> bool {
    let per_map = side * side;
    let out = side / window;
    for map in 0..x.len() / per_map {
        let base = map * per_map;
        for oy in 0..out {
            for ox in 0..out {
                let mut vals: Vec<f64> = Vec::with_capacity(window * window);
                for dy in 0..window {
                    for dx in 0..window {
                        let v = x[base + (oy * window + dy) * side + (ox * window + dx)];
                        vals.push(if by_abs { v.abs() } else { v });
                    }
                }
                vals.sort_by(|a, b| b.partial_cmp(a).unwrap());
                if vals[0] - vals[1] < gap {
                    return false;
                }
            }
        }
    }
    true
}

/// Draws until `make` yields data passing `safe`; errors after 200
/// rejections (would indicate a broken sampler, not bad luck).
fn resample<T>(
    rng: &mut ChaCha8Rng,
    mut make: impl FnMut(&mut ChaCha8Rng) -> Result<T>,
    mut safe: impl FnMut(&T) -> bool,
) -> Result<T> {
    for _ in 0..200 {
        let cand = make(rng)?;
        if safe(&cand) {
            return Ok(cand);
        }
    }
    Err(AnalysisError::Config(
        "could not sample a safe gradcheck instance in 200 tries".into(),
    ))
}

fn feature_instance(rng: &mut ChaCha8Rng, kind: &'static str) -> Result<Instance> {
    let (b, ci, co, side, k) = (2, 2, 3, 5, 3);
    resample(
        rng,
        |rng| {
            let x = param(rng, &[b, ci, side, side], -1.0, 1.0);
            let weight = param(rng, &[co, ci, k, k], -0.7, 0.7);
            let (params, cfg): (Vec<Tensor>, ConvLikeParams) = match kind {
                "conv2d" => {
                    let bias = param(rng, &[co], -0.3, 0.3);
                    let cfg = ConvLikeParams::conv(weight.clone(), Some(bias.clone()), 1, 1);
                    (vec![x.clone(), weight, bias], cfg)
                }
                "cossim2d" => {
                    let q_raw = param(rng, &[1], softplus_inv(0.05), softplus_inv(0.5));
                    let cfg = ConvLikeParams {
                        weight: weight.clone(),
                        bias: None,
                        p_raw: None,
                        q_raw: Some(q_raw.clone()),
                        p_mode: PMode::Fixed(1.0),
                        q_mode: QMode::Learned,
                        stride: 1,
                        padding: 1,
                    };
                    (vec![x.clone(), weight, q_raw], cfg)
                }
                "scs2d" => {
                    let p_raw = param(rng, &[co], -0.3, 0.7);
                    let q_raw = param(rng, &[1], softplus_inv(0.05), softplus_inv(0.5));
                    let cfg = ConvLikeParams {
                        weight: weight.clone(),
                        bias: None,
                        p_raw: Some(p_raw.clone()),
                        q_raw: Some(q_raw.clone()),
                        p_mode: PMode::Learned,
                        q_mode: QMode::Learned,
                        stride: 1,
                        padding: 1,
                    };
                    (vec![x.clone(), weight, p_raw, q_raw], cfg)
                }
                "sdp2d" => {
                    let p_raw = param(rng, &[co], -0.3, 0.7);
                    let cfg = ConvLikeParams {
                        weight: weight.clone(),
                        bias: None,
                        p_raw: Some(p_raw.clone()),
                        q_raw: None,
                        p_mode: PMode::Learned,
                        q_mode: QMode::Fixed(0.0),
                        stride: 1,
                        padding: 1,
                    };
                    (vec![x.clone(), weight, p_raw], cfg)
                }
                other => unreachable!("unknown feature kind {other}"),
            };
            let forward = move |c: &ConvLikeParams, x: &Tensor| match kind {
                "conv2d" => conv2d(x, c),
                "cossim2d" => cossim2d(x, c),
                "scs2d" => scs2d(x, c),
                "sdp2d" => sdp2d(x, c),
                _ => unreachable!(),
            };
            let probe = forward(&cfg, &x)?;
            let probe_out = probe.data().clone();
            let w = constant(rng, probe.shape());
            let loss: LossFn = Box::new(move || weighted_sum(&forward(&cfg, &x)?, &w));
            Ok((params, probe_out, loss))
        },
        |(_, probe_out, _)| {
            // Keep the pre-sharpening similarity off the sign kink; for
            // p up to e^0.7 this bounds |u| >= ~0.03.
            kind == "conv2d" || probe_out.iter().all(|v| v.abs() > 1e-3)
        },
    )
    .map(|(params, _, loss)| Instance { params, loss })
}

fn linear_instance(rng: &mut ChaCha8Rng) -> Result<Instance> {
    let x = param(rng, &[3, 8], -1.0, 1.0);
    let weight = param(rng, &[4, 8], -0.7, 0.7);
    let bias = param(rng, &[4], -0.3, 0.3);
    let probe = linear(&x, &weight, &bias)?;
    let w = constant(rng, probe.shape());
    let (xc, wc, bc) = (x.clone(), weight.clone(), bias.clone());
    Ok(Instance {
        params: vec![x, weight, bias],
        loss: Box::new(move || weighted_sum(&linear(&xc, &wc, &bc)?, &w)),
    })
}

fn relu_instance(rng: &mut ChaCha8Rng) -> Result<Instance> {
    let shape = [4, 10];
    let data: Vec<f64> = uniform(rng, &shape, -1.0, 1.0)
        .into_iter()
        .map(|u| u + 0.15 * if u >= 0.0 { 1.0 } else { -1.0 })
        .collect();
    let x = Tensor::param(data, &shape)?;
    let w = constant(rng, &shape);
    let xc = x.clone();
    Ok(Instance {
        params: vec![x],
        loss: Box::new(move || weighted_sum(&xc.relu(), &w)),
    })
}

fn pool_instance(rng: &mut ChaCha8Rng, by_abs: bool) -> Result<Instance> {
    let (b, c, side, window) = (2, 2, 6, 2);
    let x = resample(
        rng,
        |rng| Ok(param(rng, &[b, c, side, side], -1.0, 1.0)),
        |x| windows_separated(&x.data(), side, window, by_abs, 1e-2),
    )?;
    let probe = if by_abs {
        maxabspool2d(&x, window, window)?
    } else {
        maxpool2d(&x, window, window)?
    };
    let w = constant(rng, probe.shape());
    let xc = x.clone();
    Ok(Instance {
        params: vec![x],
        loss: Box::new(move || {
            let y = if by_abs {
                maxabspool2d(&xc, window, window)?
            } else {
                maxpool2d(&xc, window, window)?
            };
            weighted_sum(&y, &w)
        }),
    })
}

fn batchnorm_instance(rng: &mut ChaCha8Rng) -> Result<Instance> {
    // Training-mode output depends only on batch statistics, so the
    // running-stat side effects can't skew the finite differences.
    let (b, c, side) = (3, 2, 4);
    let x = param(rng, &[b, c, side, side], -1.0, 1.0);
    let bn = BatchNorm2d::new("bn", c);
    bn.gamma.set_data(&uniform(rng, &[c], 0.5, 1.5))?;
    bn.beta.set_data(&uniform(rng, &[c], -0.5, 0.5))?;
    let probe = bn.forward(&x, ForwardMode::Train)?;
    let w = constant(rng, probe.shape());
    let params = vec![x.clone(), bn.gamma.clone(), bn.beta.clone()];
    Ok(Instance {
        params,
        loss: Box::new(move || weighted_sum(&bn.forward(&x, ForwardMode::Train)?, &w)),
    })
}

fn cross_entropy_instance(rng: &mut ChaCha8Rng) -> Result<Instance> {
    let (n, k) = (4, 10);
    let logits = param(rng, &[n, k], -2.0, 2.0);
    let labels: Vec<usize> = (0..n).map(|_| rng.gen_range(0..k)).collect();
    let lc = logits.clone();
    Ok(Instance {
        params: vec![logits],
        loss: Box::new(move || Ok(cross_entropy_mean(&lc, &labels)?)),
    })
}

fn build_instance(op: &'static str, rng: &mut ChaCha8Rng) -> Result<Instance> {
    match op {
        "conv2d" | "cossim2d" | "scs2d" | "sdp2d" => feature_instance(rng, op),
        "linear" => linear_instance(rng),
        "relu" => relu_instance(rng),
        "maxpool2d" => pool_instance(rng, false),
        "maxabspool2d" => pool_instance(rng, true),
        "batchnorm2d" => batchnorm_instance(rng),
        "cross_entropy" => cross_entropy_instance(rng),
        other => Err(AnalysisError::Config(format!("unknown gradcheck op {other}"))),
    }
}

/// Runs the full audit: every op, `instances_per_op` randomized
/// instances each, analytic vs central finite differences.
pub fn gradcheck_suite(instances_per_op: usize, seed: u64) -> Result<GradCheckReport> {
    if instances_per_op == 0 {
        return Err(AnalysisError::Config(
            "instances_per_op must be at least 1".into(),
        ));
    }
    let mut per_op = Vec::new();
    for (oi, op) in op_names().into_iter().enumerate() {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(oi as u64);
        let mut max_rel: f64 = 0.0;
        for _ in 0..instances_per_op {
            let inst = build_instance(op, &mut rng)?;
            max_rel = max_rel.max(check_instance(&inst)?);
        }
        per_op.push(OpReport {
            op: op.into(),
            instances: instances_per_op,
            max_rel_err: max_rel,
        });
    }
    Ok(GradCheckReport { per_op })
}
