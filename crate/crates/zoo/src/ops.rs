//! Small structural ops used by the residual family.

use scslab_tensor::{Result, Tensor};

/// Appends `extra` zero-valued channels to a 4-D activation map.
/// Used by parameter-free shortcuts when a stage widens.
pub fn pad_channels(x: &Tensor, extra: usize) -> Result<Tensor> {
    let (n, c, h, w) = x.dims4()?;
    if extra == 0 {
        return Ok(x.clone());
    }
    let c_out = c + extra;
    let plane = h * w;
    let xd = x.data();
    let mut out = vec![0.0; n * c_out * plane];
    for i in 0..n {
        let src = &xd[i * c * plane..(i + 1) * c * plane];
        let dst = &mut out[i * c_out * plane..i * c_out * plane + c * plane];
        dst.copy_from_slice(src);
    }
    drop(xd);
    let xc = x.clone();
    Ok(Tensor::from_op(
        out,
        vec![n, c_out, h, w],
        vec![x.clone()],
        move |g, _| {
            xc.with_grad_mut(|gx| {
                for i in 0..n {
                    let src = &g[i * c_out * plane..i * c_out * plane + c * plane];
                    for (gxi, gi) in gx[i * c * plane..(i + 1) * c * plane].iter_mut().zip(src) {
                        *gxi += *gi;
                    }
                }
            });
        },
    ))
}
