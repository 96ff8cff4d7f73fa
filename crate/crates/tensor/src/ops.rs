//! Differentiable tensor operations.
//!
//! Every operation validates shapes/domains up front, computes its result
//! eagerly, and (when some input requires gradients) records a backward
//! closure with the exact analytic derivative. Conventions at kinks:
//! `relu` and `abs` take derivative 0 at the origin, `sign` is treated as
//! locally constant (zero derivative everywhere), and `max_with_index`
//! resolves ties to the first flat index.

use std::cell::RefCell;
use std::rc::Rc;

use crate::error::{Result, TensorError};
use crate::gemm::gemm;
use crate::tensor::Tensor;

/// Magnitudes below this are clamped inside backward formulas that divide
/// by |u| or take ln|u|; forward passes are never clamped.
pub const BACKWARD_ABS_CLAMP: f64 = 1e-12;

fn check_same_shape(op: &'static str, a: &Tensor, b: &Tensor) -> Result<()> {
    if a.shape() != b.shape() {
        return Err(TensorError::shape(
            op,
            format!("{:?} vs {:?}", a.shape(), b.shape()),
        ));
    }
    Ok(())
}

impl Tensor {
    /// Elementwise `self + other` (shapes must match).
    pub fn add(&self, other: &Tensor) -> Result<Tensor> {
        check_same_shape("add", self, other)?;
        let data: Vec<f64> = self
            .data()
            .iter()
            .zip(other.data().iter())
            .map(|(a, b)| a + b)
            .collect();
        Ok(Tensor::from_op(
            data,
            self.shape().to_vec(),
            vec![self.clone(), other.clone()],
            |g, parents| {
                parents[0].accumulate_grad(g);
                parents[1].accumulate_grad(g);
            },
        ))
    }

    /// Elementwise `self - other` (shapes must match).
    pub fn sub(&self, other: &Tensor) -> Result<Tensor> {
        check_same_shape("sub", self, other)?;
        let data: Vec<f64> = self
            .data()
            .iter()
            .zip(other.data().iter())
            .map(|(a, b)| a - b)
            .collect();
        Ok(Tensor::from_op(
            data,
            self.shape().to_vec(),
            vec![self.clone(), other.clone()],
            |g, parents| {
                parents[0].accumulate_grad(g);
                parents[1].with_grad_mut(|gb| {
                    for (gi, &gv) in gb.iter_mut().zip(g) {
                        *gi -= gv;
                    }
                });
            },
        ))
    }

    /// Elementwise `self * other` (shapes must match).
    pub fn mul(&self, other: &Tensor) -> Result<Tensor> {
        check_same_shape("mul", self, other)?;
        let data: Vec<f64> = self
            .data()
            .iter()
            .zip(other.data().iter())
            .map(|(a, b)| a * b)
            .collect();
        Ok(Tensor::from_op(
            data,
            self.shape().to_vec(),
            vec![self.clone(), other.clone()],
            |g, parents| {
                {
                    let bd = parents[1].data();
                    parents[0].with_grad_mut(|ga| {
                        for i in 0..g.len() {
                            ga[i] += g[i] * bd[i];
                        }
                    });
                }
                let ad = parents[0].data();
                parents[1].with_grad_mut(|gb| {
                    for i in 0..g.len() {
                        gb[i] += g[i] * ad[i];
                    }
                });
            },
        ))
    }

    /// Elementwise `self / other` (shapes must match, IEEE semantics at 0).
    pub fn div(&self, other: &Tensor) -> Result<Tensor> {
        check_same_shape("div", self, other)?;
        let data: Vec<f64> = self
            .data()
            .iter()
            .zip(other.data().iter())
            .map(|(a, b)| a / b)
            .collect();
        Ok(Tensor::from_op(
            data,
            self.shape().to_vec(),
            vec![self.clone(), other.clone()],
            |g, parents| {
                {
                    let bd = parents[1].data();
                    parents[0].with_grad_mut(|ga| {
                        for i in 0..g.len() {
                            ga[i] += g[i] / bd[i];
                        }
                    });
                }
                let ad = parents[0].data();
                let bd = parents[1].data();
                parents[1].with_grad_mut(|gb| {
                    for i in 0..g.len() {
                        gb[i] -= g[i] * ad[i] / (bd[i] * bd[i]);
                    }
                });
            },
        ))
    }

    /// `self + c` for a scalar constant.
    pub fn add_scalar(&self, c: f64) -> Tensor {
        let data: Vec<f64> = self.data().iter().map(|a| a + c).collect();
        Tensor::from_op(
            data,
            self.shape().to_vec(),
            vec![self.clone()],
            |g, parents| parents[0].accumulate_grad(g),
        )
    }

    /// `self * c` for a scalar constant.
    pub fn mul_scalar(&self, c: f64) -> Tensor {
        let data: Vec<f64> = self.data().iter().map(|a| a * c).collect();
        Tensor::from_op(
            data,
            self.shape().to_vec(),
            vec![self.clone()],
            move |g, parents| {
                parents[0].with_grad_mut(|ga| {
                    for (gi, &gv) in ga.iter_mut().zip(g) {
                        *gi += gv * c;
                    }
                });
            },
        )
    }

    /// Elementwise negation.
    pub fn neg(&self) -> Tensor {
        self.mul_scalar(-1.0)
    }

    /// Elementwise `max(0, x)`; derivative at 0 is 0.
    pub fn relu(&self) -> Tensor {
        let data: Vec<f64> = self.data().iter().map(|&a| a.max(0.0)).collect();
        Tensor::from_op(
            data,
            self.shape().to_vec(),
            vec![self.clone()],
            |g, parents| {
                let xd = parents[0].data();
                parents[0].with_grad_mut(|gx| {
                    for i in 0..g.len() {
                        if xd[i] > 0.0 {
                            gx[i] += g[i];
                        }
                    }
                });
            },
        )
    }

    /// Elementwise square root; errors on negative inputs.
    pub fn sqrt(&self) -> Result<Tensor> {
        if let Some(&bad) = self.data().iter().find(|v| **v < 0.0) {
            return Err(TensorError::domain(
                "sqrt",
                format!("negative input {bad}"),
            ));
        }
        let out = Rc::new(RefCell::new(
            self.data().iter().map(|a| a.sqrt()).collect::<Vec<f64>>(),
        ));
        let saved = Rc::clone(&out);
        Ok(Tensor::from_op_shared(
            out,
            self.shape().to_vec(),
            vec![self.clone()],
            move |g, parents| {
                let yd = saved.borrow();
                parents[0].with_grad_mut(|gx| {
                    for i in 0..g.len() {
                        gx[i] += g[i] * 0.5 / yd[i];
                    }
                });
            },
        ))
    }

    /// Elementwise absolute value; derivative at 0 is 0.
    pub fn abs(&self) -> Tensor {
        let data: Vec<f64> = self.data().iter().map(|a| a.abs()).collect();
        Tensor::from_op(
            data,
            self.shape().to_vec(),
            vec![self.clone()],
            |g, parents| {
                let xd = parents[0].data();
                parents[0].with_grad_mut(|gx| {
                    for i in 0..g.len() {
                        let s = if xd[i] > 0.0 {
                            1.0
                        } else if xd[i] < 0.0 {
                            -1.0
                        } else {
                            0.0
                        };
                        gx[i] += g[i] * s;
                    }
                });
            },
        )
    }

    /// Elementwise sign in {-1, 0, 1}. The result is detached: the sign
    /// function is piecewise constant, so its derivative is 0 almost
    /// everywhere and no gradient flows through it.
    pub fn sign(&self) -> Tensor {
        let data: Vec<f64> = self
            .data()
            .iter()
            .map(|&a| {
                if a > 0.0 {
                    1.0
                } else if a < 0.0 {
                    -1.0
                } else {
                    0.0
                }
            })
            .collect();
        Tensor::from_vec(data, self.shape()).expect("sign: shape preserved")
    }

    /// Elementwise natural log; errors unless all inputs are > 0.
    pub fn ln(&self) -> Result<Tensor> {
        if let Some(&bad) = self.data().iter().find(|v| **v <= 0.0) {
            return Err(TensorError::domain(
                "ln",
                format!("non-positive input {bad}"),
            ));
        }
        let data: Vec<f64> = self.data().iter().map(|a| a.ln()).collect();
        Ok(Tensor::from_op(
            data,
            self.shape().to_vec(),
            vec![self.clone()],
            |g, parents| {
                let xd = parents[0].data();
                parents[0].with_grad_mut(|gx| {
                    for i in 0..g.len() {
                        gx[i] += g[i] / xd[i];
                    }
                });
            },
        ))
    }

    /// Signed power `sign(u) * |u|^p`, the sharpening primitive.
    ///
    /// `p` must be strictly positive and either a single scalar (applied to
    /// every element) or a 1-D tensor of length `C` paired with a 4-D
    /// `(N, C, H, W)` input (applied per channel). Where an exponent equals
    /// exactly 1 the forward pass returns the input bit-for-bit, so p = 1
    /// reductions hold with zero roundoff.
    ///
    /// Derivatives: d/du = p * |u|^(p-1) and d/dp = out * ln|u|, with |u|
    /// clamped to at least [`BACKWARD_ABS_CLAMP`] inside the backward pass
    /// only.
    pub fn signed_pow(&self, p: &Tensor) -> Result<Tensor> {
        let chan_of: Box<dyn Fn(usize) -> usize> = if p.numel() == 1 {
            Box::new(|_| 0)
        } else if p.ndim() == 1 && self.ndim() == 4 && p.shape()[0] == self.shape()[1] {
            let (_, c, h, w) = self.dims4()?;
            let plane = h * w;
            Box::new(move |i| (i / plane) % c)
        } else {
            return Err(TensorError::shape(
                "signed_pow",
                format!(
                    "exponent shape {:?} incompatible with input shape {:?} \
                     (need a scalar, or per-channel [C] with 4-D input)",
                    p.shape(),
                    self.shape()
                ),
            ));
        };
        if let Some(&bad) = p.data().iter().find(|v| **v <= 0.0) {
            return Err(TensorError::domain(
                "signed_pow",
                format!("exponent must be > 0, got {bad}"),
            ));
        }

        let out: Vec<f64> = {
            let ud = self.data();
            let pd = p.data();
            ud.iter()
                .enumerate()
                .map(|(i, &u)| {
                    let pi = pd[chan_of(i)];
                    if pi == 1.0 {
                        u
                    } else if u >= 0.0 {
                        u.powf(pi)
                    } else {
                        -((-u).powf(pi))
                    }
                })
                .collect()
        };
        let storage = Rc::new(RefCell::new(out));
        let saved = Rc::clone(&storage);
        Ok(Tensor::from_op_shared(
            storage,
            self.shape().to_vec(),
            vec![self.clone(), p.clone()],
            move |g, parents| {
                let ud = parents[0].data();
                let pd = parents[1].data();
                let yd = saved.borrow();
                parents[0].with_grad_mut(|gu| {
                    for i in 0..g.len() {
                        let pi = pd[chan_of(i)];
                        let absu = ud[i].abs().max(BACKWARD_ABS_CLAMP);
                        gu[i] += g[i] * pi * absu.powf(pi - 1.0);
                    }
                });
                parents[1].with_grad_mut(|gp| {
                    for i in 0..g.len() {
                        let absu = ud[i].abs().max(BACKWARD_ABS_CLAMP);
                        gp[chan_of(i)] += g[i] * yd[i] * absu.ln();
                    }
                });
            },
        ))
    }

    /// Sum of all elements, as a scalar tensor.
    pub fn sum(&self) -> Tensor {
        let total: f64 = self.data().iter().sum();
        Tensor::from_op(vec![total], Vec::new(), vec![self.clone()], |g, parents| {
            let g0 = g[0];
            parents[0].with_grad_mut(|gx| {
                for gi in gx.iter_mut() {
                    *gi += g0;
                }
            });
        })
    }

    /// Mean of all elements, as a scalar tensor.
    pub fn mean(&self) -> Result<Tensor> {
        let n = self.numel();
        if n == 0 {
            return Err(TensorError::usage("mean", "empty tensor"));
        }
        let total: f64 = self.data().iter().sum();
        let inv = 1.0 / n as f64;
        Ok(Tensor::from_op(
            vec![total * inv],
            Vec::new(),
            vec![self.clone()],
            move |g, parents| {
                let g0 = g[0] * inv;
                parents[0].with_grad_mut(|gx| {
                    for gi in gx.iter_mut() {
                        *gi += g0;
                    }
                });
            },
        ))
    }

    /// Global maximum and its flat index (ties resolve to the first index).
    /// The gradient routes entirely to the reported element.
    pub fn max_with_index(&self) -> Result<(Tensor, usize)> {
        if self.numel() == 0 {
            return Err(TensorError::usage("max_with_index", "empty tensor"));
        }
        let (mut best_i, mut best_v) = (0usize, f64::NEG_INFINITY);
        for (i, &v) in self.data().iter().enumerate() {
            if v > best_v {
                best_v = v;
                best_i = i;
            }
        }
        let idx = best_i;
        let t = Tensor::from_op(
            vec![best_v],
            Vec::new(),
            vec![self.clone()],
            move |g, parents| {
                let g0 = g[0];
                parents[0].with_grad_mut(|gx| gx[idx] += g0);
            },
        );
        Ok((t, idx))
    }

    /// 2-D matrix product `(m, k) x (k, n) -> (m, n)`.
    pub fn matmul(&self, other: &Tensor) -> Result<Tensor> {
        let (m, k) = self.dims2()?;
        let (k2, n) = other.dims2()?;
        if k != k2 {
            return Err(TensorError::shape(
                "matmul",
                format!("inner dims differ: {:?} x {:?}", self.shape(), other.shape()),
            ));
        }
        let mut out = vec![0.0; m * n];
        gemm(m, k, n, 1.0, &self.data(), false, &other.data(), false, 0.0, &mut out);
        Ok(Tensor::from_op(
            out,
            vec![m, n],
            vec![self.clone(), other.clone()],
            move |g, parents| {
                if parents[0].requires_grad() {
                    let bd = parents[1].data();
                    parents[0].with_grad_mut(|ga| {
                        gemm(m, n, k, 1.0, g, false, &bd, true, 1.0, ga);
                    });
                }
                if parents[1].requires_grad() {
                    let ad = parents[0].data();
                    parents[1].with_grad_mut(|gb| {
                        gemm(k, m, n, 1.0, &ad, true, g, false, 1.0, gb);
                    });
                }
            },
        ))
    }

    /// Same data viewed under a new shape with equal element count.
    /// Shares storage with the input.
    pub fn reshape(&self, shape: &[usize]) -> Result<Tensor> {
        let numel: usize = shape.iter().product();
        if numel != self.numel() {
            return Err(TensorError::shape(
                "reshape",
                format!("{:?} -> {:?} changes element count", self.shape(), shape),
            ));
        }
        Ok(Tensor::from_op_shared(
            self.storage_rc(),
            shape.to_vec(),
            vec![self.clone()],
            |g, parents| parents[0].accumulate_grad(g),
        ))
    }

    /// Zero-pad the two spatial dims of an `(N, C, H, W)` tensor by `pad`
    /// on every side.
    pub fn pad2d(&self, pad: usize) -> Result<Tensor> {
        let (n, c, h, w) = self.dims4()?;
        let (oh, ow) = (h + 2 * pad, w + 2 * pad);
        let mut out = vec![0.0; n * c * oh * ow];
        {
            let xd = self.data();
            for img in 0..n * c {
                let src = &xd[img * h * w..(img + 1) * h * w];
                let dst = &mut out[img * oh * ow..(img + 1) * oh * ow];
                for row in 0..h {
                    let d0 = (row + pad) * ow + pad;
                    dst[d0..d0 + w].copy_from_slice(&src[row * w..(row + 1) * w]);
                }
            }
        }
        Ok(Tensor::from_op(
            out,
            vec![n, c, oh, ow],
            vec![self.clone()],
            move |g, parents| {
                parents[0].with_grad_mut(|gx| {
                    for img in 0..n * c {
                        let gsrc = &g[img * oh * ow..(img + 1) * oh * ow];
                        let gdst = &mut gx[img * h * w..(img + 1) * h * w];
                        for row in 0..h {
                            let s0 = (row + pad) * ow + pad;
                            for col in 0..w {
                                gdst[row * w + col] += gsrc[s0 + col];
                            }
                        }
                    }
                });
            },
        ))
    }

    /// Slice `len` indices starting at `start` along dimension `dim`,
    /// keeping all other dimensions whole.
    pub fn narrow(&self, dim: usize, start: usize, len: usize) -> Result<Tensor> {
        if dim >= self.ndim() {
            return Err(TensorError::usage(
                "narrow",
                format!("dim {} out of range for shape {:?}", dim, self.shape()),
            ));
        }
        let size = self.shape()[dim];
        if start + len > size || len == 0 {
            return Err(TensorError::usage(
                "narrow",
                format!("range {start}..{} invalid for dim of size {size}", start + len),
            ));
        }
        let outer: usize = self.shape()[..dim].iter().product();
        let inner: usize = self.shape()[dim + 1..].iter().product();
        let mut out = vec![0.0; outer * len * inner];
        {
            let xd = self.data();
            for o in 0..outer {
                let src0 = (o * size + start) * inner;
                let dst0 = o * len * inner;
                out[dst0..dst0 + len * inner].copy_from_slice(&xd[src0..src0 + len * inner]);
            }
        }
        let mut shape = self.shape().to_vec();
        shape[dim] = len;
        Ok(Tensor::from_op(
            out,
            shape,
            vec![self.clone()],
            move |g, parents| {
                parents[0].with_grad_mut(|gx| {
                    for o in 0..outer {
                        let dst0 = (o * size + start) * inner;
                        let src0 = o * len * inner;
                        for i in 0..len * inner {
                            gx[dst0 + i] += g[src0 + i];
                        }
                    }
                });
            },
        ))
    }
}
