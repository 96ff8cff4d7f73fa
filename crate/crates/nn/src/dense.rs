//! Fully-connected head and classification loss.

use std::rc::Rc;

use scslab_tensor::gemm::gemm;
use scslab_tensor::{Result, Tensor, TensorError};

/// Affine map `y = x W^T + b` for `x (N, IN)`, `weight (OUT, IN)`,
/// `bias (OUT)`.
pub fn linear(x: &Tensor, weight: &Tensor, bias: &Tensor) -> Result<Tensor> {
    let (n, d_in) = x.dims2()?;
    let (d_out, w_in) = weight.dims2()?;
    if w_in != d_in || bias.shape() != [d_out] {
        return Err(TensorError::shape(
            "linear",
            format!(
                "x {:?} weight {:?} bias {:?}",
                x.shape(),
                weight.shape(),
                bias.shape()
            ),
        ));
    }
    let mut y = vec![0.0; n * d_out];
    {
        let bd = bias.data();
        for row in y.chunks_mut(d_out) {
            row.copy_from_slice(&bd);
        }
    }
    gemm(n, d_in, d_out, 1.0, &x.data(), false, &weight.data(), true, 1.0, &mut y);
    Ok(Tensor::from_op(
        y,
        vec![n, d_out],
        vec![x.clone(), weight.clone(), bias.clone()],
        move |g, parents| {
            let (x_t, w_t, b_t) = (&parents[0], &parents[1], &parents[2]);
            if x_t.requires_grad() {
                let wd = w_t.data();
                x_t.with_grad_mut(|gx| {
                    gemm(n, d_out, d_in, 1.0, g, false, &wd, false, 1.0, gx);
                });
            }
            if w_t.requires_grad() {
                let xd = x_t.data();
                w_t.with_grad_mut(|gw| {
                    gemm(d_out, n, d_in, 1.0, g, true, &xd, false, 1.0, gw);
                });
            }
            if b_t.requires_grad() {
                b_t.with_grad_mut(|gb| {
                    for row in g.chunks(d_out) {
                        for (gbo, &gv) in gb.iter_mut().zip(row) {
                            *gbo += gv;
                        }
                    }
                });
            }
        },
    ))
}

/// Mean cross-entropy of logits `(N, K)` against integer class labels,
/// computed with the max-subtraction softmax for stability. The backward
/// pass is the classic `(softmax - onehot) / N`.
pub fn cross_entropy_mean(logits: &Tensor, labels: &[usize]) -> Result<Tensor> {
    let (n, k) = logits.dims2()?;
    if labels.len() != n {
        return Err(TensorError::shape(
            "cross_entropy_mean",
            format!("{} labels for {} rows", labels.len(), n),
        ));
    }
    if let Some(&bad) = labels.iter().find(|&&l| l >= k) {
        return Err(TensorError::usage(
            "cross_entropy_mean",
            format!("label {bad} out of range for {k} classes"),
        ));
    }
    let mut probs = vec![0.0; n * k];
    let mut loss = 0.0;
    {
        let ld = logits.data();
        for (i, row) in ld.chunks(k).enumerate() {
            let m = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let mut z = 0.0;
            for (pj, &v) in probs[i * k..(i + 1) * k].iter_mut().zip(row) {
                *pj = (v - m).exp();
                z += *pj;
            }
            for pj in probs[i * k..(i + 1) * k].iter_mut() {
                *pj /= z;
            }
            loss -= probs[i * k + labels[i]].ln();
        }
    }
    loss /= n as f64;
    let probs = Rc::new(probs);
    let labels: Rc<[usize]> = labels.into();
    Ok(Tensor::from_op(
        vec![loss],
        Vec::new(),
        vec![logits.clone()],
        move |g, parents| {
            let g0 = g[0] / n as f64;
            parents[0].with_grad_mut(|gl| {
                for i in 0..n {
                    for j in 0..k {
                        let onehot = (j == labels[i]) as u8 as f64;
                        gl[i * k + j] += g0 * (probs[i * k + j] - onehot);
                    }
                }
            });
        },
    ))
}

/// Fraction of rows whose argmax logit equals the label (ties resolve to
/// the first index, matching `max_with_index`).
pub fn accuracy(logits: &Tensor, labels: &[usize]) -> Result<f64> {
    let (n, k) = logits.dims2()?;
    if labels.len() != n {
        return Err(TensorError::shape(
            "accuracy",
            format!("{} labels for {} rows", labels.len(), n),
        ));
    }
    let ld = logits.data();
    let mut hits = 0usize;
    for (i, row) in ld.chunks(k).enumerate() {
        let mut best = 0usize;
        for j in 1..k {
            if row[j] > row[best] {
                best = j;
            }
        }
        hits += (best == labels[i]) as usize;
    }
    Ok(hits as f64 / n as f64)
}

/// Softmax probabilities of a logits matrix (forward only, no graph).
pub fn softmax_rows(logits: &Tensor) -> Result<Vec<f64>> {
    let (_, k) = logits.dims2()?;
    let ld = logits.data();
    let mut out = vec![0.0; ld.len()];
    for (row_in, row_out) in ld.chunks(k).zip(out.chunks_mut(k)) {
        let m = row_in.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let mut z = 0.0;
        for (o, &v) in row_out.iter_mut().zip(row_in) {
            *o = (v - m).exp();
            z += *o;
        }
        for o in row_out.iter_mut() {
            *o /= z;
        }
    }
    Ok(out)
}
