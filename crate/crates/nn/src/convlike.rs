//! Fused conv-like feature extractors over sliding windows.
//!
//! Four interchangeable kinds share one engine:
//!
//! * `conv2d`    - plain correlation `s . k + bias`
//! * `cossim2d`  - smoothed cosine `s . k / ((||s|| + q) ||k||)`
//! * `scs2d`     - sharpened cosine `sign(c) |c|^p` of the smoothed cosine
//! * `sdp2d`     - sharpened raw dot `sign(d) |d|^p`, no normalization
//!
//! Each forward lowers the input with im2col, runs one GEMM per image, and
//! applies the kind's normalization/sharpening. The whole layer is a single
//! graph node whose backward closure implements the analytic gradients for
//! the input, the kernels, the bias, and the `p`/`q` reparameterizations.
//!
//! Parameterizations: learned exponents live as `p_raw` with
//! `p = exp(p_raw)` per output channel (so `p > 0` always), and the learned
//! smoothing lives as a scalar `q_raw` with `q = softplus(q_raw) >= 0`.
//! Fixed modes bypass the reparameterization and accept exact constants,
//! which is how `q = 0` configurations are expressed.

use std::cell::RefCell;
use std::rc::Rc;

use scslab_tensor::gemm::gemm;
use scslab_tensor::{Result, Tensor, TensorError, BACKWARD_ABS_CLAMP};

use crate::im2col::{col2im_accumulate, im2col, ConvGeometry};
use crate::patch::NORM_CLAMP;

/// How the sharpening exponent is parameterized.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PMode {
    /// Per-output-channel `p = exp(p_raw)`, trained.
    Learned,
    /// One constant exponent for every channel, not trained. Must be > 0.
    Fixed(f64),
}

/// How the patch-norm smoothing term is parameterized.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum QMode {
    /// Scalar `q = softplus(q_raw)`, trained.
    Learned,
    /// Constant `q >= 0`, not trained. `Fixed(0.0)` gives the bare cosine.
    Fixed(f64),
}

/// Parameter bundle for one conv-like layer application.
///
/// Which fields must be present depends on the kind:
/// conv uses `weight` + optional `bias`; cossim adds `q`; scs adds `p` and
/// `q`; sdp adds `p` only. Learned modes require the corresponding raw
/// tensor (`p_raw` of shape `(O,)`, scalar `q_raw`); fixed modes require it
/// absent.
#[derive(Debug, Clone)]
pub struct ConvLikeParams {
    pub weight: Tensor,
    pub bias: Option<Tensor>,
    pub p_raw: Option<Tensor>,
    pub q_raw: Option<Tensor>,
    pub p_mode: PMode,
    pub q_mode: QMode,
    pub stride: usize,
    pub padding: usize,
}

impl ConvLikeParams {
    /// Bundle with everything defaulted for a plain convolution.
    pub fn conv(weight: Tensor, bias: Option<Tensor>, stride: usize, padding: usize) -> Self {
        ConvLikeParams {
            weight,
            bias,
            p_raw: None,
            q_raw: None,
            p_mode: PMode::Fixed(1.0),
            q_mode: QMode::Fixed(0.0),
            stride,
            padding,
        }
    }
}

/// Numerically stable `ln(1 + e^x)`.
pub fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

/// Inverse of [`softplus`] for y > 0: the `x` with `softplus(x) = y`.
pub fn softplus_inv(y: f64) -> f64 {
    assert!(y > 0.0, "softplus_inv needs y > 0");
    y + (-(-y).exp().ln_1p())
}

/// Numerically stable logistic function.
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Kind {
    Conv,
    CosSim,
    Scs,
    Sdp,
}

impl Kind {
    fn name(self) -> &'static str {
        match self {
            Kind::Conv => "conv",
            Kind::CosSim => "cossim",
            Kind::Scs => "scs",
            Kind::Sdp => "sdp",
        }
    }
    fn uses_bias(self) -> bool {
        self == Kind::Conv
    }
    fn uses_p(self) -> bool {
        matches!(self, Kind::Scs | Kind::Sdp)
    }
    fn uses_q(self) -> bool {
        matches!(self, Kind::CosSim | Kind::Scs)
    }
    fn normalizes(self) -> bool {
        matches!(self, Kind::CosSim | Kind::Scs)
    }
    fn sharpens(self) -> bool {
        matches!(self, Kind::Scs | Kind::Sdp)
    }
}

/// Plain 2-D correlation with optional bias.
pub fn conv2d(x: &Tensor, params: &ConvLikeParams) -> Result<Tensor> {
    forward_convlike(Kind::Conv, x, params)
}

/// Smoothed cosine-similarity response in [-1, 1].
pub fn cossim2d(x: &Tensor, params: &ConvLikeParams) -> Result<Tensor> {
    forward_convlike(Kind::CosSim, x, params)
}

/// Sharpened cosine similarity `sign(c) |c|^p`.
pub fn scs2d(x: &Tensor, params: &ConvLikeParams) -> Result<Tensor> {
    forward_convlike(Kind::Scs, x, params)
}

/// Sharpened raw dot product `sign(d) |d|^p` (ablation: sharpening
/// without cosine normalization).
pub fn sdp2d(x: &Tensor, params: &ConvLikeParams) -> Result<Tensor> {
    forward_convlike(Kind::Sdp, x, params)
}

/// Effective per-channel exponents for a parameter bundle.
pub fn effective_p(params: &ConvLikeParams, out_c: usize) -> Result<Vec<f64>> {
    match (params.p_mode, &params.p_raw) {
        (PMode::Learned, Some(pr)) => {
            if pr.shape() != [out_c] {
                return Err(TensorError::shape(
                    "effective_p",
                    format!("p_raw shape {:?}, expected [{out_c}]", pr.shape()),
                ));
            }
            Ok(pr.data().iter().map(|v| v.exp()).collect())
        }
        (PMode::Fixed(v), None) => {
            if v <= 0.0 {
                return Err(TensorError::domain(
                    "effective_p",
                    format!("fixed exponent must be > 0, got {v}"),
                ));
            }
            Ok(vec![v; out_c])
        }
        (PMode::Learned, None) => Err(TensorError::usage(
            "effective_p",
            "learned exponent mode but p_raw is absent",
        )),
        (PMode::Fixed(_), Some(_)) => Err(TensorError::usage(
            "effective_p",
            "fixed exponent mode must not carry a p_raw tensor",
        )),
    }
}

/// Effective smoothing scalar for a parameter bundle.
pub fn effective_q(params: &ConvLikeParams) -> Result<f64> {
    match (params.q_mode, &params.q_raw) {
        (QMode::Learned, Some(qr)) => {
            if qr.numel() != 1 {
                return Err(TensorError::shape(
                    "effective_q",
                    format!("q_raw must be scalar, got shape {:?}", qr.shape()),
                ));
            }
            Ok(softplus(qr.data()[0]))
        }
        (QMode::Fixed(v), None) => {
            if v < 0.0 {
                return Err(TensorError::domain(
                    "effective_q",
                    format!("fixed smoothing must be >= 0, got {v}"),
                ));
            }
            Ok(v)
        }
        (QMode::Learned, None) => Err(TensorError::usage(
            "effective_q",
            "learned smoothing mode but q_raw is absent",
        )),
        (QMode::Fixed(_), Some(_)) => Err(TensorError::usage(
            "effective_q",
            "fixed smoothing mode must not carry a q_raw tensor",
        )),
    }
}

fn validate(kind: Kind, params: &ConvLikeParams, g: &ConvGeometry) -> Result<()> {
    if let Some(b) = &params.bias {
        if !kind.uses_bias() {
            return Err(TensorError::usage(
                "convlike",
                format!("kind '{}' does not take a bias", kind.name()),
            ));
        }
        if b.shape() != [g.out_c] {
            return Err(TensorError::shape(
                "conv2d",
                format!("bias shape {:?}, expected [{}]", b.shape(), g.out_c),
            ));
        }
    }
    if !kind.uses_p() && params.p_raw.is_some() {
        return Err(TensorError::usage(
            "convlike",
            format!("kind '{}' does not take a sharpening exponent", kind.name()),
        ));
    }
    if !kind.uses_q() && params.q_raw.is_some() {
        return Err(TensorError::usage(
            "convlike",
            format!("kind '{}' does not take a smoothing term", kind.name()),
        ));
    }
    Ok(())
}

fn forward_convlike(kind: Kind, x: &Tensor, params: &ConvLikeParams) -> Result<Tensor> {
    let g = ConvGeometry::new(x.shape(), params.weight.shape(), params.stride, params.padding)?;
    validate(kind, params, &g)?;
    let (l, npos, out_c, batch) = (g.patch_len(), g.npos(), g.out_c, g.batch);

    let eff_p: Vec<f64> = if kind.uses_p() {
        effective_p(params, out_c)?
    } else {
        Vec::new()
    };
    let eff_q: f64 = if kind.uses_q() { effective_q(params)? } else { 0.0 };
    // Chain factors for the reparameterizations, captured for backward.
    let dq_dqraw = match (&params.q_raw, params.q_mode) {
        (Some(qr), QMode::Learned) => sigmoid(qr.data()[0]),
        _ => 0.0,
    };

    let cols = im2col(&x.data(), &g);

    // Kernel norms (raw, clamp applied where used).
    let wd = params.weight.data();
    let nk_raw: Vec<f64> = if kind.normalizes() {
        (0..out_c)
            .map(|o| wd[o * l..(o + 1) * l].iter().map(|v| v * v).sum::<f64>().sqrt())
            .collect()
    } else {
        Vec::new()
    };

    // Patch norms per image and output position (raw).
    let ns_raw: Vec<f64> = if kind.normalizes() {
        let mut ns = vec![0.0; batch * npos];
        for b in 0..batch {
            let block = &cols[b * l * npos..(b + 1) * l * npos];
            let acc = &mut ns[b * npos..(b + 1) * npos];
            for row in 0..l {
                let src = &block[row * npos..(row + 1) * npos];
                for (a, v) in acc.iter_mut().zip(src) {
                    *a += v * v;
                }
            }
            for a in acc.iter_mut() {
                *a = a.sqrt();
            }
        }
        ns
    } else {
        Vec::new()
    };

    // Patch responses: one GEMM per image into the (B, O, NPOS) buffer.
    let mut dots = vec![0.0; batch * out_c * npos];
    for b in 0..batch {
        let block = &cols[b * l * npos..(b + 1) * l * npos];
        let out = &mut dots[b * out_c * npos..(b + 1) * out_c * npos];
        gemm(out_c, l, npos, 1.0, &wd, false, block, false, 0.0, out);
    }
    drop(wd);

    // Kind-specific response. `u` is the pre-sharpening value saved for
    // backward (the cosine for scs, the raw dot for sdp).
    let mut u_saved: Vec<f64> = Vec::new();
    let y: Vec<f64> = match kind {
        Kind::Conv => {
            let mut y = dots;
            if let Some(bias) = &params.bias {
                let bd = bias.data();
                for b in 0..batch {
                    for o in 0..out_c {
                        let row = &mut y[(b * out_c + o) * npos..(b * out_c + o + 1) * npos];
                        for v in row.iter_mut() {
                            *v += bd[o];
                        }
                    }
                }
            }
            y
        }
        Kind::CosSim | Kind::Scs => {
            let mut u = dots;
            for b in 0..batch {
                for o in 0..out_c {
                    let nko = nk_raw[o].max(NORM_CLAMP);
                    let row = &mut u[(b * out_c + o) * npos..(b * out_c + o + 1) * npos];
                    let nsb = &ns_raw[b * npos..(b + 1) * npos];
                    for (v, &nsj) in row.iter_mut().zip(nsb) {
                        let denom = (nsj + eff_q).max(NORM_CLAMP) * nko;
                        // Mathematically |u| <= 1 for q >= 0; the clamp only
                        // absorbs roundoff at the boundary.
                        *v = (*v / denom).clamp(-1.0, 1.0);
                    }
                }
            }
            if kind == Kind::Scs {
                let y = spow_rows(&u, &eff_p, batch, out_c, npos);
                u_saved = u;
                y
            } else {
                u
            }
        }
        Kind::Sdp => {
            let y = spow_rows(&dots, &eff_p, batch, out_c, npos);
            u_saved = dots;
            y
        }
    };

    let out_storage = Rc::new(RefCell::new(y));
    let y_rc = Rc::clone(&out_storage);
    let cols_rc = Rc::new(cols);
    let ns_rc = Rc::new(ns_raw);
    let nk_rc = Rc::new(nk_raw);
    let u_rc = Rc::new(u_saved);

    let x_t = x.clone();
    let w_t = params.weight.clone();
    let bias_t = params.bias.clone();
    let p_raw_t = params.p_raw.clone();
    let q_raw_t = params.q_raw.clone();

    let mut parents = vec![x_t.clone(), w_t.clone()];
    parents.extend(bias_t.iter().cloned());
    parents.extend(p_raw_t.iter().cloned());
    parents.extend(q_raw_t.iter().cloned());

    let backward = move |gy: &[f64], _parents: &[Tensor]| {
        backward_convlike(BackwardArgs {
            kind,
            g,
            gy,
            cols: &cols_rc,
            ns_raw: &ns_rc,
            nk_raw: &nk_rc,
            u: &u_rc,
            y: &y_rc.borrow(),
            eff_p: &eff_p,
            eff_q,
            dq_dqraw,
            x: &x_t,
            w: &w_t,
            bias: bias_t.as_ref(),
            p_raw: p_raw_t.as_ref(),
            q_raw: q_raw_t.as_ref(),
        });
    };

    Ok(Tensor::from_op_shared(
        out_storage,
        vec![batch, out_c, g.out_h, g.out_w],
        parents,
        backward,
    ))
}

/// Rowwise signed power with per-output-channel exponents. Exponent 1 rows
/// are copied bit-exactly.
fn spow_rows(u: &[f64], p: &[f64], batch: usize, out_c: usize, npos: usize) -> Vec<f64> {
    let mut y = vec![0.0; u.len()];
    for b in 0..batch {
        for o in 0..out_c {
            let start = (b * out_c + o) * npos;
            let (src, dst) = (&u[start..start + npos], &mut y[start..start + npos]);
            let po = p[o];
            if po == 1.0 {
                dst.copy_from_slice(src);
            } else {
                for (d, &v) in dst.iter_mut().zip(src) {
                    *d = if v >= 0.0 { v.powf(po) } else { -((-v).powf(po)) };
                }
            }
        }
    }
    y
}

struct BackwardArgs<'a> {
    kind: Kind,
    g: ConvGeometry,
    gy: &'a [f64],
    cols: &'a [f64],
    ns_raw: &'a [f64],
    nk_raw: &'a [f64],
    u: &'a [f64],
    y: &'a [f64],
    eff_p: &'a [f64],
    eff_q: f64,
    dq_dqraw: f64,
    x: &'a Tensor,
    w: &'a Tensor,
    bias: Option<&'a Tensor>,
    p_raw: Option<&'a Tensor>,
    q_raw: Option<&'a Tensor>,
}

fn backward_convlike(a: BackwardArgs<'_>) {
    let g = a.g;
    let (l, npos, out_c, batch) = (g.patch_len(), g.npos(), g.out_c, g.batch);
    let kind = a.kind;

    // Stage 1: gradient w.r.t. the pre-sharpening value u.
    // du = gy * p * |u|^(p-1), using |y| / |u| = |u|^(p-1) to avoid a pow;
    // |u| is clamped per the backward-clamp convention. Exponent-1 channels
    // pass gy through unchanged.
    let du: Vec<f64> = if kind.sharpens() {
        let mut du = vec![0.0; a.gy.len()];
        for b in 0..batch {
            for o in 0..out_c {
                let s = (b * out_c + o) * npos;
                let po = a.eff_p[o];
                if po == 1.0 {
                    du[s..s + npos].copy_from_slice(&a.gy[s..s + npos]);
                } else {
                    for j in 0..npos {
                        let absu = a.u[s + j].abs().max(BACKWARD_ABS_CLAMP);
                        du[s + j] = a.gy[s + j] * po * (a.y[s + j].abs() / absu);
                    }
                }
            }
        }
        du
    } else {
        Vec::new()
    };
    let du: &[f64] = if kind.sharpens() { &du } else { a.gy };

    // Gradient w.r.t. the exponent reparameterization:
    // d y / d p = y * ln|u|, then d p / d p_raw = p.
    if let Some(p_raw) = a.p_raw {
        if p_raw.requires_grad() {
            let mut gp = vec![0.0; out_c];
            for b in 0..batch {
                for o in 0..out_c {
                    let s = (b * out_c + o) * npos;
                    let mut acc = 0.0;
                    for j in 0..npos {
                        let absu = a.u[s + j].abs().max(BACKWARD_ABS_CLAMP);
                        acc += a.gy[s + j] * a.y[s + j] * absu.ln();
                    }
                    gp[o] += acc;
                }
            }
            for (gpo, &po) in gp.iter_mut().zip(a.eff_p) {
                *gpo *= po;
            }
            p_raw.accumulate_grad(&gp);
        }
    }

    // Stage 2: distribute du onto the raw patch responses and the norms.
    // The pre-sharpening cosine: for cossim it is the layer output itself.
    let u_vals: &[f64] = if kind == Kind::CosSim { a.y } else { a.u };
    let needs_norm_grads = kind.normalizes();
    let mut grad_dots_buf: Vec<f64> = Vec::new();
    let mut grad_ns: Vec<f64> = Vec::new();
    let mut grad_nk: Vec<f64> = Vec::new();
    if needs_norm_grads {
        grad_dots_buf = vec![0.0; du.len()];
        grad_ns = vec![0.0; batch * npos];
        grad_nk = vec![0.0; out_c];
        for b in 0..batch {
            let nsb = &a.ns_raw[b * npos..(b + 1) * npos];
            for o in 0..out_c {
                let s = (b * out_c + o) * npos;
                let nko = a.nk_raw[o].max(NORM_CLAMP);
                let mut gnk_acc = 0.0;
                for j in 0..npos {
                    let d_s = (nsb[j] + a.eff_q).max(NORM_CLAMP);
                    let duj = du[s + j];
                    let uj = u_vals[s + j];
                    grad_dots_buf[s + j] = duj / (d_s * nko);
                    // d u / d ns = -u / (ns + q); frozen when clamped.
                    if nsb[j] + a.eff_q > NORM_CLAMP {
                        grad_ns[b * npos + j] -= duj * uj / d_s;
                    }
                    gnk_acc -= duj * uj;
                }
                // d u / d nk = -u / nk; frozen when the kernel norm clamps.
                if a.nk_raw[o] > NORM_CLAMP {
                    grad_nk[o] += gnk_acc / nko;
                }
            }
        }
    }
    let grad_dots: &[f64] = if needs_norm_grads { &grad_dots_buf } else { du };

    // Smoothing gradient: q enters every denominator exactly like ns, so
    // its partial is the sum of the ns partials, chained through softplus.
    if let Some(q_raw) = a.q_raw {
        if q_raw.requires_grad() {
            let gq: f64 = grad_ns.iter().sum::<f64>() * a.dq_dqraw;
            q_raw.accumulate_grad(&[gq]);
        }
    }

    // Bias gradient: plain sum over batch and positions.
    if let Some(bias) = a.bias {
        if bias.requires_grad() {
            bias.with_grad_mut(|gb| {
                for b in 0..batch {
                    for o in 0..out_c {
                        let s = (b * out_c + o) * npos;
                        gb[o] += a.gy[s..s + npos].iter().sum::<f64>();
                    }
                }
            });
        }
    }

    // Weight gradient: GEMM against the stored patch matrix, plus the
    // kernel-norm direction term for normalized kinds.
    if a.w.requires_grad() {
        a.w.with_grad_mut(|gw| {
            for b in 0..batch {
                let block = &a.cols[b * l * npos..(b + 1) * l * npos];
                let gd = &grad_dots[b * out_c * npos..(b + 1) * out_c * npos];
                gemm(out_c, npos, l, 1.0, gd, false, block, true, 1.0, gw);
            }
            if needs_norm_grads {
                let wd = a.w.data();
                for o in 0..out_c {
                    if a.nk_raw[o] > NORM_CLAMP {
                        let scale = grad_nk[o] / a.nk_raw[o];
                        for li in 0..l {
                            gw[o * l + li] += scale * wd[o * l + li];
                        }
                    }
                }
            }
        });
    }

    // Input gradient: backproject through the GEMM, add the patch-norm
    // direction term, then scatter columns back onto the image.
    if a.x.requires_grad() {
        let wd = a.w.data();
        let mut grad_block = vec![0.0; l * npos];
        a.x.with_grad_mut(|gx| {
            for b in 0..batch {
                let gd = &grad_dots[b * out_c * npos..(b + 1) * out_c * npos];
                gemm(l, out_c, npos, 1.0, &wd, true, gd, false, 0.0, &mut grad_block);
                if needs_norm_grads {
                    let block = &a.cols[b * l * npos..(b + 1) * l * npos];
                    let nsb = &a.ns_raw[b * npos..(b + 1) * npos];
                    let gns = &grad_ns[b * npos..(b + 1) * npos];
                    for row in 0..l {
                        let cb = &block[row * npos..(row + 1) * npos];
                        let gb = &mut grad_block[row * npos..(row + 1) * npos];
                        for j in 0..npos {
                            // d ns / d P = P / ns; frozen at zero patches.
                            if nsb[j] > NORM_CLAMP {
                                gb[j] += gns[j] * cb[j] / nsb[j];
                            }
                        }
                    }
                }
                let one = ConvGeometry { batch: 1, ..g };
                let img_len = g.in_c * g.in_h * g.in_w;
                col2im_accumulate(&grad_block, &one, &mut gx[b * img_len..(b + 1) * img_len]);
            }
        });
    }
}
