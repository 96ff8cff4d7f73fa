//! Per-channel batch normalization for `(N, C, H, W)` activations.

use std::cell::RefCell;
use std::rc::Rc;

use scslab_tensor::{Result, Tensor, TensorError};

use crate::layer::ForwardMode;

/// Batch normalization layer with learned affine parameters and running
/// statistics for evaluation.
///
/// Training mode normalizes with the batch mean and biased batch variance
/// and updates the running statistics in place as a side effect
/// (`running = (1 - momentum) * running + momentum * batch`, where the
/// running variance uses the unbiased batch variance). Evaluation mode
/// normalizes with the stored running statistics and touches nothing.
pub struct BatchNorm2d {
    name: String,
    pub gamma: Tensor,
    pub beta: Tensor,
    pub running_mean: Tensor,
    pub running_var: Tensor,
    pub momentum: f64,
    pub eps: f64,
    channels: usize,
}

impl BatchNorm2d {
    pub fn new(name: impl Into<String>, channels: usize) -> BatchNorm2d {
        BatchNorm2d {
            name: name.into(),
            gamma: Tensor::param(vec![1.0; channels], &[channels]).expect("gamma"),
            beta: Tensor::param(vec![0.0; channels], &[channels]).expect("beta"),
            running_mean: Tensor::zeros(&[channels]),
            running_var: Tensor::full(&[channels], 1.0),
            momentum: 0.1,
            eps: 1e-5,
            channels,
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn forward(&self, x: &Tensor, mode: ForwardMode) -> Result<Tensor> {
        let (n, c, h, w) = x.dims4()?;
        if c != self.channels {
            return Err(TensorError::shape(
                "batchnorm2d",
                format!("input has {c} channels, layer expects {}", self.channels),
            ));
        }
        let m = n * h * w; // elements per channel
        if m == 0 {
            return Err(TensorError::usage("batchnorm2d", "empty batch"));
        }

        // Per-channel statistics for this pass.
        let (mean, var): (Vec<f64>, Vec<f64>) = match mode {
            ForwardMode::Train => {
                let xd = x.data();
                let mut mean = vec![0.0; c];
                let mut var = vec![0.0; c];
                for img in 0..n {
                    for ch in 0..c {
                        let s = (img * c + ch) * h * w;
                        mean[ch] += xd[s..s + h * w].iter().sum::<f64>();
                    }
                }
                for v in mean.iter_mut() {
                    *v /= m as f64;
                }
                for img in 0..n {
                    for ch in 0..c {
                        let s = (img * c + ch) * h * w;
                        var[ch] += xd[s..s + h * w]
                            .iter()
                            .map(|v| (v - mean[ch]) * (v - mean[ch]))
                            .sum::<f64>();
                    }
                }
                for v in var.iter_mut() {
                    *v /= m as f64; // biased variance normalizes the batch
                }
                (mean, var)
            }
            ForwardMode::Eval => (self.running_mean.to_vec(), self.running_var.to_vec()),
        };

        if mode == ForwardMode::Train {
            // Side effect: fold the batch statistics into the running ones.
            let mom = self.momentum;
            let unbias = if m > 1 { m as f64 / (m as f64 - 1.0) } else { 1.0 };
            let mut rm = self.running_mean.data_mut();
            let mut rv = self.running_var.data_mut();
            for ch in 0..c {
                rm[ch] = (1.0 - mom) * rm[ch] + mom * mean[ch];
                rv[ch] = (1.0 - mom) * rv[ch] + mom * var[ch] * unbias;
            }
        }

        let inv_std: Vec<f64> = var.iter().map(|v| 1.0 / (v + self.eps).sqrt()).collect();

        // Normalized activations, saved for the backward pass.
        let mut xhat = vec![0.0; x.numel()];
        let mut y = vec![0.0; x.numel()];
        {
            let xd = x.data();
            let gd = self.gamma.data();
            let bd = self.beta.data();
            for img in 0..n {
                for ch in 0..c {
                    let s = (img * c + ch) * h * w;
                    let (mu, is, ga, be) = (mean[ch], inv_std[ch], gd[ch], bd[ch]);
                    for i in s..s + h * w {
                        let xh = (xd[i] - mu) * is;
                        xhat[i] = xh;
                        y[i] = ga * xh + be;
                    }
                }
            }
        }

        let xhat = Rc::new(xhat);
        let inv_std = Rc::new(inv_std);
        let batch_coupled = mode == ForwardMode::Train;
        let gamma_t = self.gamma.clone();
        let plane = h * w;

        Ok(Tensor::from_op_shared(
            Rc::new(RefCell::new(y)),
            vec![n, c, h, w],
            vec![x.clone(), self.gamma.clone(), self.beta.clone()],
            move |g, parents| {
                let x_t = &parents[0];
                let beta_t = &parents[2];
                // Per-channel reductions sum(g) and sum(g * xhat).
                let mut sum_g = vec![0.0; c];
                let mut sum_gx = vec![0.0; c];
                for img in 0..n {
                    for ch in 0..c {
                        let s = (img * c + ch) * plane;
                        for i in s..s + plane {
                            sum_g[ch] += g[i];
                            sum_gx[ch] += g[i] * xhat[i];
                        }
                    }
                }
                beta_t.accumulate_grad(&sum_g);
                gamma_t.accumulate_grad(&sum_gx);
                if x_t.requires_grad() {
                    let gd = gamma_t.data();
                    x_t.with_grad_mut(|gx| {
                        for img in 0..n {
                            for ch in 0..c {
                                let s = (img * c + ch) * plane;
                                let scale = gd[ch] * inv_std[ch];
                                if batch_coupled {
                                    let mg = sum_g[ch] / m as f64;
                                    let mgx = sum_gx[ch] / m as f64;
                                    for i in s..s + plane {
                                        gx[i] += scale * (g[i] - mg - xhat[i] * mgx);
                                    }
                                } else {
                                    for i in s..s + plane {
                                        gx[i] += scale * g[i];
                                    }
                                }
                            }
                        }
                    });
                }
            },
        ))
    }
}
