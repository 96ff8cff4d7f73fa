//! Patch extraction: lowering sliding windows to a dense matrix and back.
//!
//! For an `(N, C, H, W)` input and a `KH x KW` kernel with stride and
//! zero-padding, the lowered buffer holds one `(L, NPOS)` block per image,
//! where `L = C * KH * KW` and `NPOS = OH * OW`. Column `j` of a block is
//! the flattened (possibly zero-padded) input window centered at output
//! position `j`, so a row-major GEMM of the `(O, L)` weight matrix against
//! a block yields all patch responses of one image at once.

use scslab_tensor::{Result, TensorError};

/// Static geometry of one conv-like application.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ConvGeometry {
    pub batch: usize,
    pub in_c: usize,
    pub in_h: usize,
    pub in_w: usize,
    pub out_c: usize,
    pub kh: usize,
    pub kw: usize,
    pub stride: usize,
    pub pad: usize,
    pub out_h: usize,
    pub out_w: usize,
}

impl ConvGeometry {
    pub fn new(
        x_shape: &[usize],
        w_shape: &[usize],
        stride: usize,
        pad: usize,
    ) -> Result<ConvGeometry> {
        let [batch, in_c, in_h, in_w] = *x_shape else {
            return Err(TensorError::shape(
                "conv_geometry",
                format!("input must be 4-D (N, C, H, W), got {x_shape:?}"),
            ));
        };
        let [out_c, w_in_c, kh, kw] = *w_shape else {
            return Err(TensorError::shape(
                "conv_geometry",
                format!("weight must be 4-D (O, C, KH, KW), got {w_shape:?}"),
            ));
        };
        if w_in_c != in_c {
            return Err(TensorError::shape(
                "conv_geometry",
                format!("input has {in_c} channels but weight expects {w_in_c}"),
            ));
        }
        if stride == 0 {
            return Err(TensorError::usage("conv_geometry", "stride must be >= 1"));
        }
        if kh == 0 || kw == 0 || kh > in_h + 2 * pad || kw > in_w + 2 * pad {
            return Err(TensorError::shape(
                "conv_geometry",
                format!(
                    "kernel {kh}x{kw} does not fit {in_h}x{in_w} input with pad {pad}"
                ),
            ));
        }
        let out_h = (in_h + 2 * pad - kh) / stride + 1;
        let out_w = (in_w + 2 * pad - kw) / stride + 1;
        Ok(ConvGeometry {
            batch,
            in_c,
            in_h,
            in_w,
            out_c,
            kh,
            kw,
            stride,
            pad,
            out_h,
            out_w,
        })
    }

    /// Flattened patch length `C * KH * KW`.
    pub fn patch_len(&self) -> usize {
        self.in_c * self.kh * self.kw
    }

    /// Output positions per image `OH * OW`.
    pub fn npos(&self) -> usize {
        self.out_h * self.out_w
    }
}

/// Lower `x` (flat `(N, C, H, W)` data) into per-image `(L, NPOS)` blocks.
pub fn im2col(xd: &[f64], g: &ConvGeometry) -> Vec<f64> {
    let (l, npos) = (g.patch_len(), g.npos());
    let mut cols = vec![0.0; g.batch * l * npos];
    let img_len = g.in_c * g.in_h * g.in_w;
    for b in 0..g.batch {
        let img = &xd[b * img_len..(b + 1) * img_len];
        let block = &mut cols[b * l * npos..(b + 1) * l * npos];
        for row in 0..l {
            let ci = row / (g.kh * g.kw);
            let ky = (row / g.kw) % g.kh;
            let kx = row % g.kw;
            let plane = &img[ci * g.in_h * g.in_w..(ci + 1) * g.in_h * g.in_w];
            let dst = &mut block[row * npos..(row + 1) * npos];
            for oy in 0..g.out_h {
                let iy = (oy * g.stride + ky) as isize - g.pad as isize;
                if iy < 0 || iy >= g.in_h as isize {
                    continue; // stays zero (padding)
                }
                let src_row = &plane[iy as usize * g.in_w..(iy as usize + 1) * g.in_w];
                let d0 = oy * g.out_w;
                for ox in 0..g.out_w {
                    let ix = (ox * g.stride + kx) as isize - g.pad as isize;
                    if ix >= 0 && ix < g.in_w as isize {
                        dst[d0 + ox] = src_row[ix as usize];
                    }
                }
            }
        }
    }
    cols
}

/// Scatter per-image `(L, NPOS)` gradient blocks back onto the input,
/// accumulating overlapping windows and dropping padding positions.
pub fn col2im_accumulate(cols: &[f64], g: &ConvGeometry, gx: &mut [f64]) {
    let (l, npos) = (g.patch_len(), g.npos());
    let img_len = g.in_c * g.in_h * g.in_w;
    for b in 0..g.batch {
        let block = &cols[b * l * npos..(b + 1) * l * npos];
        let img = &mut gx[b * img_len..(b + 1) * img_len];
        for row in 0..l {
            let ci = row / (g.kh * g.kw);
            let ky = (row / g.kw) % g.kh;
            let kx = row % g.kw;
            let plane = &mut img[ci * g.in_h * g.in_w..(ci + 1) * g.in_h * g.in_w];
            let src = &block[row * npos..(row + 1) * npos];
            for oy in 0..g.out_h {
                let iy = (oy * g.stride + ky) as isize - g.pad as isize;
                if iy < 0 || iy >= g.in_h as isize {
                    continue;
                }
                let p0 = iy as usize * g.in_w;
                let s0 = oy * g.out_w;
                for ox in 0..g.out_w {
                    let ix = (ox * g.stride + kx) as isize - g.pad as isize;
                    if ix >= 0 && ix < g.in_w as isize {
                        plane[p0 + ix as usize] += src[s0 + ox];
                    }
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn geo(
        (n, c, h, w): (usize, usize, usize, usize),
        (o, kh, kw): (usize, usize, usize),
        stride: usize,
        pad: usize,
    ) -> ConvGeometry {
        ConvGeometry::new(&[n, c, h, w], &[o, c, kh, kw], stride, pad).unwrap()
    }

    /// Extract the padded window at output position (oy, ox) straight from
    /// the input, as an independent oracle for column contents.
    fn window(
        xd: &[f64],
        g: &ConvGeometry,
        b: usize,
        oy: usize,
        ox: usize,
    ) -> Vec<f64> {
        let mut out = Vec::with_capacity(g.patch_len());
        let img = &xd[b * g.in_c * g.in_h * g.in_w..];
        for ci in 0..g.in_c {
            for ky in 0..g.kh {
                for kx in 0..g.kw {
                    let iy = (oy * g.stride + ky) as isize - g.pad as isize;
                    let ix = (ox * g.stride + kx) as isize - g.pad as isize;
                    let v = if iy < 0
                        || ix < 0
                        || iy >= g.in_h as isize
                        || ix >= g.in_w as isize
                    {
                        0.0
                    } else {
                        img[ci * g.in_h * g.in_w + iy as usize * g.in_w + ix as usize]
                    };
                    out.push(v);
                }
            }
        }
        out
    }

    #[test]
    fn columns_reproduce_input_windows_exactly() {
        for (stride, pad) in [(1, 0), (1, 1), (2, 0), (2, 1)] {
            let g = geo((2, 3, 5, 4), (1, 3, 3), stride, pad);
            let n = 2 * 3 * 5 * 4;
            let xd: Vec<f64> = (0..n).map(|i| i as f64 - 20.0).collect();
            let cols = im2col(&xd, &g);
            let (l, npos) = (g.patch_len(), g.npos());
            for b in 0..g.batch {
                let block = &cols[b * l * npos..(b + 1) * l * npos];
                for oy in 0..g.out_h {
                    for ox in 0..g.out_w {
                        let j = oy * g.out_w + ox;
                        let col: Vec<f64> =
                            (0..l).map(|row| block[row * npos + j]).collect();
                        assert_eq!(
                            col,
                            window(&xd, &g, b, oy, ox),
                            "stride={stride} pad={pad} b={b} oy={oy} ox={ox}"
                        );
                    }
                }
            }
        }
    }

    #[test]
    fn col2im_counts_window_multiplicity() {
        // With all-ones columns, each input cell accumulates exactly the
        // number of windows that cover it.
        let g = geo((1, 1, 3, 3), (1, 2, 2), 1, 0);
        let cols = vec![1.0; g.patch_len() * g.npos()];
        let mut gx = vec![0.0; 9];
        col2im_accumulate(&cols, &g, &mut gx);
        assert_eq!(
            gx,
            vec![1.0, 2.0, 1.0, 2.0, 4.0, 2.0, 1.0, 2.0, 1.0]
        );
    }

    #[test]
    fn geometry_rejects_mismatched_channels_and_oversized_kernels() {
        assert!(ConvGeometry::new(&[1, 3, 8, 8], &[4, 2, 3, 3], 1, 1).is_err());
        assert!(ConvGeometry::new(&[1, 3, 4, 4], &[4, 3, 7, 7], 1, 0).is_err());
        assert!(ConvGeometry::new(&[1, 3, 8, 8], &[4, 3, 3, 3], 0, 1).is_err());
    }

    #[test]
    fn output_size_formula() {
        let g = geo((1, 3, 32, 32), (8, 3, 3), 1, 1);
        assert_eq!((g.out_h, g.out_w), (32, 32));
        let g = geo((1, 3, 32, 32), (8, 3, 3), 2, 1);
        assert_eq!((g.out_h, g.out_w), (16, 16));
        let g = geo((1, 1, 6, 6), (1, 2, 2), 2, 0);
        assert_eq!((g.out_h, g.out_w), (3, 3));
    }
}
