//! Scalar reference semantics for one patch/kernel pair.
//!
//! These functions define what each feature extractor computes on a single
//! flattened window, with no batching, striding or autodiff. The fused
//! layer kernels must agree with them; tests hold the layers to these
//! definitions.

/// Magnitudes smaller than this are clamped wherever a norm appears in a
/// denominator.
pub const NORM_CLAMP: f64 = 1e-12;

/// Plain inner product (the convolution patch response, bias excluded).
pub fn conv_patch(s: &[f64], k: &[f64]) -> f64 {
    debug_assert_eq!(s.len(), k.len());
    s.iter().zip(k).map(|(a, b)| a * b).sum()
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|a| a * a).sum::<f64>().sqrt()
}

/// Scalar signed power `sign(u) * |u|^p`. Exponent 1 returns `u` exactly.
pub fn signed_pow_scalar(u: f64, p: f64) -> f64 {
    if p == 1.0 {
        u
    } else if u >= 0.0 {
        u.powf(p)
    } else {
        -((-u).powf(p))
    }
}

/// Cosine similarity between patch and kernel with additive patch-norm
/// smoothing `q >= 0`:
///
/// `s . k / ((||s|| + q) * ||k||)`
///
/// Denominator factors are clamped to at least [`NORM_CLAMP`] and the
/// result is clamped into [-1, 1], which is the mathematical range for
/// q >= 0 and guards rounding at the boundary.
pub fn cossim_patch(s: &[f64], k: &[f64], q: f64) -> f64 {
    let d = conv_patch(s, k);
    let denom = (norm(s) + q).max(NORM_CLAMP) * norm(k).max(NORM_CLAMP);
    (d / denom).clamp(-1.0, 1.0)
}

/// Sharpened cosine similarity: `sign(c) * |c|^p` of the smoothed cosine
/// `c = s . k / ((||s|| + q) * ||k||)`, with sharpening exponent `p > 0`.
pub fn scs_patch(s: &[f64], k: &[f64], p: f64, q: f64) -> f64 {
    signed_pow_scalar(cossim_patch(s, k, q), p)
}

/// Sharpened raw dot product: `sign(d) * |d|^p` with no normalization.
/// Isolates the sharpening nonlinearity from the cosine normalization.
pub fn sdp_patch(s: &[f64], k: &[f64], p: f64) -> f64 {
    signed_pow_scalar(conv_patch(s, k), p)
}
