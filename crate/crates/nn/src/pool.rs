//! Spatial pooling over non-overlapping or strided windows (no padding).

use scslab_tensor::{Result, Tensor, TensorError};

fn pool_geometry(
    op: &'static str,
    x: &Tensor,
    window: usize,
    stride: usize,
) -> Result<(usize, usize, usize, usize, usize, usize)> {
    let (n, c, h, w) = x.dims4()?;
    if window == 0 || stride == 0 {
        return Err(TensorError::usage(op, "window and stride must be >= 1"));
    }
    if window > h || window > w {
        return Err(TensorError::shape(
            op,
            format!("window {window} exceeds spatial size {h}x{w}"),
        ));
    }
    let oh = (h - window) / stride + 1;
    let ow = (w - window) / stride + 1;
    Ok((n, c, h, w, oh, ow))
}

/// Shared window scan. `key` ranks candidates; the emitted value is the
/// raw (signed) element that attained the maximal key. Ties resolve to the
/// first element in row-major window order via a strict comparison.
fn pool_by_key(
    op: &'static str,
    x: &Tensor,
    window: usize,
    stride: usize,
    key: fn(f64) -> f64,
) -> Result<Tensor> {
    let (n, c, h, w, oh, ow) = pool_geometry(op, x, window, stride)?;
    let planes = n * c;
    let mut out = vec![0.0; planes * oh * ow];
    let mut argmax = vec![0usize; planes * oh * ow];
    {
        let xd = x.data();
        for pl in 0..planes {
            let plane = &xd[pl * h * w..(pl + 1) * h * w];
            for oy in 0..oh {
                for ox in 0..ow {
                    let mut best_idx = 0usize;
                    let mut best_key = f64::NEG_INFINITY;
                    let mut best_val = 0.0;
                    for ky in 0..window {
                        let row0 = (oy * stride + ky) * w + ox * stride;
                        for kx in 0..window {
                            let v = plane[row0 + kx];
                            if key(v) > best_key {
                                best_key = key(v);
                                best_val = v;
                                best_idx = row0 + kx;
                            }
                        }
                    }
                    let o = pl * oh * ow + oy * ow + ox;
                    out[o] = best_val;
                    argmax[o] = pl * h * w + best_idx;
                }
            }
        }
    }
    Ok(Tensor::from_op(
        out,
        vec![n, c, oh, ow],
        vec![x.clone()],
        move |g, parents| {
            parents[0].with_grad_mut(|gx| {
                for (k, &src) in argmax.iter().enumerate() {
                    gx[src] += g[k];
                }
            });
        },
    ))
}

/// Maximum pooling: emits the window's largest value. The gradient routes
/// to the argmax element; ties go to the first in row-major order.
pub fn maxpool2d(x: &Tensor, window: usize, stride: usize) -> Result<Tensor> {
    pool_by_key("maxpool2d", x, window, stride, |v| v)
}

/// Maximum-absolute pooling: emits the window element of largest
/// magnitude, keeping its sign, so strong negative responses survive
/// pooling. Ties go to the first element in row-major order.
pub fn maxabspool2d(x: &Tensor, window: usize, stride: usize) -> Result<Tensor> {
    pool_by_key("maxabspool2d", x, window, stride, f64::abs)
}

/// Average pooling to a fixed output grid; the input spatial dims must be
/// divisible by the output dims (uniform bins).
pub fn adaptive_avgpool2d(x: &Tensor, out_h: usize, out_w: usize) -> Result<Tensor> {
    let (n, c, h, w) = x.dims4()?;
    if out_h == 0 || out_w == 0 || h % out_h != 0 || w % out_w != 0 {
        return Err(TensorError::shape(
            "adaptive_avgpool2d",
            format!("cannot pool {h}x{w} evenly onto {out_h}x{out_w}"),
        ));
    }
    let (bh, bw) = (h / out_h, w / out_w);
    let inv = 1.0 / (bh * bw) as f64;
    let planes = n * c;
    let mut out = vec![0.0; planes * out_h * out_w];
    {
        let xd = x.data();
        for pl in 0..planes {
            let plane = &xd[pl * h * w..(pl + 1) * h * w];
            for oy in 0..out_h {
                for ox in 0..out_w {
                    let mut acc = 0.0;
                    for ky in 0..bh {
                        let r0 = (oy * bh + ky) * w + ox * bw;
                        for kx in 0..bw {
                            acc += plane[r0 + kx];
                        }
                    }
                    out[pl * out_h * out_w + oy * out_w + ox] = acc * inv;
                }
            }
        }
    }
    Ok(Tensor::from_op(
        out,
        vec![n, c, out_h, out_w],
        vec![x.clone()],
        move |g, parents| {
            parents[0].with_grad_mut(|gx| {
                for pl in 0..planes {
                    for oy in 0..out_h {
                        for ox in 0..out_w {
                            let gv = g[pl * out_h * out_w + oy * out_w + ox] * inv;
                            for ky in 0..bh {
                                let r0 = pl * h * w + (oy * bh + ky) * w + ox * bw;
                                for kx in 0..bw {
                                    gx[r0 + kx] += gv;
                                }
                            }
                        }
                    }
                }
            });
        },
    ))
}

/// Collapse `(N, C, H, W)` to `(N, C*H*W)`.
pub fn flatten(x: &Tensor) -> Result<Tensor> {
    let (n, c, h, w) = x.dims4()?;
    x.reshape(&[n, c * h * w])
}
