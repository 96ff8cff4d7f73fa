//! Shared helpers for the layer-kernel integration tests.
#![allow(dead_code)] // each test binary uses its own subset

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn rand_vec(rng: &mut ChaCha8Rng, n: usize, lo: f64, hi: f64) -> Vec<f64> {
    (0..n).map(|_| rng.gen_range(lo..hi)).collect()
}

pub fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-8)
}

/// Central finite difference of `eval` w.r.t. coordinate `i` of `x0`.
pub fn central_diff(eval: &mut dyn FnMut(&[f64]) -> f64, x0: &[f64], i: usize, h: f64) -> f64 {
    let mut xp = x0.to_vec();
    let mut xm = x0.to_vec();
    xp[i] += h;
    xm[i] -= h;
    (eval(&xp) - eval(&xm)) / (2.0 * h)
}

/// Largest relative error between an analytic gradient and central
/// differences of `eval` over every coordinate of `x0`.
///
/// Each coordinate is measured at step `h` and, if that disagrees, again
/// at `h / 8`; the smaller error counts. Central-difference truncation
/// error is O(h^2) and shrinks 64x under the refinement, while an actually
/// wrong analytic gradient stays wrong at every step size.
pub fn max_grad_rel_err(
    analytic: &[f64],
    x0: &[f64],
    eval: &mut dyn FnMut(&[f64]) -> f64,
    h: f64,
) -> f64 {
    assert_eq!(analytic.len(), x0.len());
    let mut worst = 0.0f64;
    for i in 0..x0.len() {
        let fd = central_diff(eval, x0, i, h);
        let mut e = rel_err(analytic[i], fd);
        if e > 1e-6 {
            let fd2 = central_diff(eval, x0, i, h / 8.0);
            e = e.min(rel_err(analytic[i], fd2));
        }
        worst = worst.max(e);
    }
    worst
}

/// Plain dot product of a tensor's data with a fixed weight vector,
/// giving a scalar objective whose gradient exercises every output.
pub fn weighted_sum_data(data: &[f64], w: &[f64]) -> f64 {
    data.iter().zip(w).map(|(a, b)| a * b).sum()
}
