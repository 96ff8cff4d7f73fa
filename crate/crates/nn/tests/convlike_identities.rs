//! Reduction identities, invariance and range properties of the feature
//! kinds, checked against independent oracles.

mod common;

use common::*;
use rand::Rng;
use scslab_nn::patch::{cossim_patch, scs_patch};
use scslab_nn::{conv2d, cossim2d, maxabspool2d, maxpool2d, scs2d, sdp2d, ConvLikeParams, PMode, QMode};
use scslab_tensor::Tensor;

fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// Direct sliding-window convolution, written as the obvious quadruple
/// loop with explicit padding checks. Serves as an implementation-
/// independent oracle for the im2col + GEMM route.
#[allow(clippy::too_many_arguments)]
fn naive_conv(
    x: &[f64],
    (n, c, h, w): (usize, usize, usize, usize),
    wts: &[f64],
    bias: Option<&[f64]>,
    (o, kh, kw): (usize, usize, usize),
    stride: usize,
    pad: usize,
) -> Vec<f64> {
    let oh = (h + 2 * pad - kh) / stride + 1;
    let ow = (w + 2 * pad - kw) / stride + 1;
    let mut out = vec![0.0; n * o * oh * ow];
    for b in 0..n {
        for oc in 0..o {
            for oy in 0..oh {
                for ox in 0..ow {
                    let mut acc = bias.map_or(0.0, |bv| bv[oc]);
                    for ci in 0..c {
                        for ky in 0..kh {
                            for kx in 0..kw {
                                let iy = (oy * stride + ky) as isize - pad as isize;
                                let ix = (ox * stride + kx) as isize - pad as isize;
                                if iy < 0 || ix < 0 || iy >= h as isize || ix >= w as isize {
                                    continue;
                                }
                                let xv = x[((b * c + ci) * h + iy as usize) * w + ix as usize];
                                let wv = wts[((oc * c + ci) * kh + ky) * kw + kx];
                                acc += xv * wv;
                            }
                        }
                    }
                    out[((b * o + oc) * oh + oy) * ow + ox] = acc;
                }
            }
        }
    }
    out
}

/// Flattened padded window at one output position (independent of im2col).
fn window(
    x: &[f64],
    (n_img, c, h, w): (usize, usize, usize, usize),
    b: usize,
    (kh, kw): (usize, usize),
    stride: usize,
    pad: usize,
    oy: usize,
    ox: usize,
) -> Vec<f64> {
    let _ = n_img;
    let mut out = Vec::with_capacity(c * kh * kw);
    for ci in 0..c {
        for ky in 0..kh {
            for kx in 0..kw {
                let iy = (oy * stride + ky) as isize - pad as isize;
                let ix = (ox * stride + kx) as isize - pad as isize;
                let v = if iy < 0 || ix < 0 || iy >= h as isize || ix >= w as isize {
                    0.0
                } else {
                    x[((b * c + ci) * h + iy as usize) * w + ix as usize]
                };
                out.push(v);
            }
        }
    }
    out
}

fn fixed_params(weight: Tensor, p: f64, q: f64, stride: usize, pad: usize) -> ConvLikeParams {
    ConvLikeParams {
        weight,
        bias: None,
        p_raw: None,
        q_raw: None,
        p_mode: PMode::Fixed(p),
        q_mode: QMode::Fixed(q),
        stride,
        padding: pad,
    }
}

#[test]
fn conv2d_matches_the_naive_loop() {
    let mut r = rng(11);
    for &(stride, pad) in &[(1usize, 1usize), (2, 0), (1, 2)] {
        let (n, c, h, w, o, k) = (2, 3, 8, 7, 4, 3);
        let xv = rand_vec(&mut r, n * c * h * w, -1.0, 1.0);
        let wv = rand_vec(&mut r, o * c * k * k, -0.5, 0.5);
        let bv = rand_vec(&mut r, o, -0.2, 0.2);
        let x = Tensor::from_vec(xv.clone(), &[n, c, h, w]).unwrap();
        let params = ConvLikeParams::conv(
            Tensor::from_vec(wv.clone(), &[o, c, k, k]).unwrap(),
            Some(Tensor::from_vec(bv.clone(), &[o]).unwrap()),
            stride,
            pad,
        );
        let y = conv2d(&x, &params).unwrap();
        let want = naive_conv(&xv, (n, c, h, w), &wv, Some(&bv), (o, k, k), stride, pad);
        assert!(
            max_abs_diff(&y.data(), &want) < 1e-12,
            "stride {stride} pad {pad}"
        );
    }
}

#[test]
fn scs_and_cossim_match_the_patch_reference() {
    let mut r = rng(12);
    let (n, c, h, w, o, k, stride, pad) = (2, 2, 6, 5, 3, 3, 1, 1);
    let xv = rand_vec(&mut r, n * c * h * w, -1.0, 1.0);
    let wv = rand_vec(&mut r, o * c * k * k, -0.8, 0.8);
    let (p, q) = (2.5, 0.15);
    let x = Tensor::from_vec(xv.clone(), &[n, c, h, w]).unwrap();
    let weight = Tensor::from_vec(wv.clone(), &[o, c, k, k]).unwrap();
    let y_scs = scs2d(&x, &fixed_params(weight.clone(), p, q, stride, pad)).unwrap();
    let y_cos = cossim2d(&x, &fixed_params(weight, 1.0, q, stride, pad)).unwrap();
    let (oh, ow) = (h, w); // stride 1, pad 1, k 3 preserves the size
    let yd_scs = y_scs.to_vec();
    let yd_cos = y_cos.to_vec();
    for b in 0..n {
        for oc in 0..o {
            let kern = &wv[oc * c * k * k..(oc + 1) * c * k * k];
            for oy in 0..oh {
                for ox in 0..ow {
                    let s = window(&xv, (n, c, h, w), b, (k, k), stride, pad, oy, ox);
                    let idx = ((b * o + oc) * oh + oy) * ow + ox;
                    let want_scs = scs_patch(&s, kern, p, q);
                    let want_cos = cossim_patch(&s, kern, q);
                    assert!((yd_scs[idx] - want_scs).abs() < 1e-12);
                    assert!((yd_cos[idx] - want_cos).abs() < 1e-12);
                }
            }
        }
    }
}

#[test]
fn scs_with_unit_exponent_and_zero_smoothing_is_cossim() {
    let mut r = rng(13);
    let (n, c, h, w, o, k) = (2, 3, 7, 7, 4, 3);
    let xv = rand_vec(&mut r, n * c * h * w, -1.0, 1.0);
    let wv = rand_vec(&mut r, o * c * k * k, -0.6, 0.6);
    let x = Tensor::from_vec(xv, &[n, c, h, w]).unwrap();
    let weight = Tensor::from_vec(wv, &[o, c, k, k]).unwrap();
    let a = scs2d(&x, &fixed_params(weight.clone(), 1.0, 0.0, 1, 1)).unwrap();
    let b = cossim2d(&x, &fixed_params(weight, 1.0, 0.0, 1, 1)).unwrap();
    assert!(max_abs_diff(&a.data(), &b.data()) < 1e-12);
}

#[test]
fn sdp_with_unit_exponent_is_conv_without_bias() {
    let mut r = rng(14);
    let (n, c, h, w, o, k) = (2, 3, 7, 6, 4, 3);
    let xv = rand_vec(&mut r, n * c * h * w, -1.0, 1.0);
    let wv = rand_vec(&mut r, o * c * k * k, -0.6, 0.6);
    let x = Tensor::from_vec(xv, &[n, c, h, w]).unwrap();
    let weight = Tensor::from_vec(wv, &[o, c, k, k]).unwrap();
    let a = sdp2d(&x, &fixed_params(weight.clone(), 1.0, 0.0, 1, 1)).unwrap();
    let b = conv2d(&x, &ConvLikeParams::conv(weight, None, 1, 1)).unwrap();
    assert!(max_abs_diff(&a.data(), &b.data()) < 1e-12);
}

#[test]
fn maxabspool_equals_maxpool_on_non_negative_maps() {
    let mut r = rng(15);
    for _ in 0..20 {
        let vals = rand_vec(&mut r, 2 * 3 * 8 * 8, 0.0, 5.0);
        let x = Tensor::from_vec(vals, &[2, 3, 8, 8]).unwrap();
        let a = maxpool2d(&x, 2, 2).unwrap();
        let b = maxabspool2d(&x, 2, 2).unwrap();
        assert_eq!(a.to_vec(), b.to_vec());
    }
}

#[test]
fn scs_responses_are_bounded_by_one() {
    let mut r = rng(16);
    for trial in 0..1000 {
        let (c, k) = (2, 3);
        let xv = rand_vec(&mut r, c * k * k, -3.0, 3.0);
        let wv = rand_vec(&mut r, c * k * k, -3.0, 3.0);
        let p = r.gen_range(0.25..4.0);
        let q = r.gen_range(0.0..0.5);
        let x = Tensor::from_vec(xv, &[1, c, k, k]).unwrap();
        let weight = Tensor::from_vec(wv, &[1, c, k, k]).unwrap();
        let y = scs2d(&x, &fixed_params(weight, p, q, 1, 0)).unwrap();
        let v = y.item().unwrap();
        assert!(v.abs() <= 1.0, "trial {trial}: |{v}| > 1");
    }
}

#[test]
fn scs_is_invariant_to_kernel_rescaling() {
    let mut r = rng(17);
    let (n, c, h, w, o, k) = (1, 3, 6, 6, 4, 3);
    let xv = rand_vec(&mut r, n * c * h * w, -1.0, 1.0);
    let wv = rand_vec(&mut r, o * c * k * k, -0.6, 0.6);
    let x = Tensor::from_vec(xv, &[n, c, h, w]).unwrap();
    let base = scs2d(
        &x,
        &fixed_params(Tensor::from_vec(wv.clone(), &[o, c, k, k]).unwrap(), 2.0, 0.1, 1, 1),
    )
    .unwrap();
    for scale in [0.1, 10.0] {
        let ws: Vec<f64> = wv.iter().map(|v| v * scale).collect();
        let y = scs2d(
            &x,
            &fixed_params(Tensor::from_vec(ws, &[o, c, k, k]).unwrap(), 2.0, 0.1, 1, 1),
        )
        .unwrap();
        let d = max_abs_diff(&base.data(), &y.data());
        assert!(d < 1e-9, "scale {scale}: max deviation {d}");
    }
}

#[test]
fn conv_is_linear_in_kernel_scale_but_scs_is_not_fooled() {
    // Scaling conv kernels by 10 scales responses by 10; scs responses
    // stay put. This is the contrast the normalization exists for.
    let mut r = rng(18);
    let (c, k) = (2, 3);
    let xv = rand_vec(&mut r, c * k * k, -1.0, 1.0);
    let wv = rand_vec(&mut r, c * k * k, -0.5, 0.5);
    let x = Tensor::from_vec(xv, &[1, c, k, k]).unwrap();
    let w1 = Tensor::from_vec(wv.clone(), &[1, c, k, k]).unwrap();
    let w10 = Tensor::from_vec(wv.iter().map(|v| v * 10.0).collect(), &[1, c, k, k]).unwrap();
    let c1 = conv2d(&x, &ConvLikeParams::conv(w1.clone(), None, 1, 0)).unwrap().item().unwrap();
    let c10 = conv2d(&x, &ConvLikeParams::conv(w10.clone(), None, 1, 0)).unwrap().item().unwrap();
    assert!((c10 - 10.0 * c1).abs() < 1e-9);
    let s1 = scs2d(&x, &fixed_params(w1, 2.0, 0.1, 1, 0)).unwrap().item().unwrap();
    let s10 = scs2d(&x, &fixed_params(w10, 2.0, 0.1, 1, 0)).unwrap().item().unwrap();
    assert!((s10 - s1).abs() < 1e-9);
}
