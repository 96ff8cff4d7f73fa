//! Thin safe wrapper over the dense f64 matrix-multiply kernel.
//!
//! All matrices are row-major slices. Transposition is expressed through
//! strides, so no operand is ever materialized transposed.

/// `c = alpha * op(a) * op(b) + beta * c`
///
/// `op(a)` is `a` as an `m x k` matrix: if `ta` is false, `a` is stored
/// `m x k` row-major; if true, `a` is stored `k x m` row-major and read
/// transposed. Likewise `op(b)` is `k x n` controlled by `tb`. `c` is
/// always `m x n` row-major.
///
/// Panics if a slice is too short for its described shape, since that is a
/// programming error at a call site, not a recoverable condition.
#[allow(clippy::too_many_arguments)]
pub fn gemm(
    m: usize,
    k: usize,
    n: usize,
    alpha: f64,
    a: &[f64],
    ta: bool,
    b: &[f64],
    tb: bool,
    beta: f64,
    c: &mut [f64],
) {
    assert!(a.len() >= m * k, "gemm: a too short for {m}x{k}");
    assert!(b.len() >= k * n, "gemm: b too short for {k}x{n}");
    assert!(c.len() >= m * n, "gemm: c too short for {m}x{n}");
    if m == 0 || n == 0 {
        return;
    }
    if k == 0 {
        for v in c[..m * n].iter_mut() {
            *v *= beta;
        }
        return;
    }
    let (rsa, csa) = if ta { (1, m as isize) } else { (k as isize, 1) };
    let (rsb, csb) = if tb { (1, k as isize) } else { (n as isize, 1) };
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            alpha,
            a.as_ptr(),
            rsa,
            csa,
            b.as_ptr(),
            rsb,
            csb,
            beta,
            c.as_mut_ptr(),
            n as isize,
            1,
        );
    }
}

/// Reference triple-loop product with identical semantics to [`gemm`].
/// Kept as an independent correctness oracle for tests.
#[allow(clippy::too_many_arguments)]
pub fn gemm_naive(
    m: usize,
    k: usize,
    n: usize,
    alpha: f64,
    a: &[f64],
    ta: bool,
    b: &[f64],
    tb: bool,
    beta: f64,
    c: &mut [f64],
) {
    let at = |i: usize, l: usize| if ta { a[l * m + i] } else { a[i * k + l] };
    let bt = |l: usize, j: usize| if tb { b[j * k + l] } else { b[l * n + j] };
    for i in 0..m {
        for j in 0..n {
            let mut acc = 0.0;
            for l in 0..k {
                acc += at(i, l) * bt(l, j);
            }
            c[i * n + j] = alpha * acc + beta * c[i * n + j];
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
        a.iter()
            .zip(b)
            .map(|(x, y)| (x - y).abs())
            .fold(0.0, f64::max)
    }

    #[test]
    fn matches_naive_all_transpose_combinations() {
        let (m, k, n) = (5, 7, 4);
        // Deterministic pseudo-data, no RNG needed.
        let a: Vec<f64> = (0..m * k).map(|i| ((i * 37 + 11) % 23) as f64 * 0.13 - 1.0).collect();
        let b: Vec<f64> = (0..k * n).map(|i| ((i * 53 + 5) % 19) as f64 * 0.21 - 2.0).collect();
        for &ta in &[false, true] {
            for &tb in &[false, true] {
                let mut c1 = vec![0.5; m * n];
                let mut c2 = c1.clone();
                gemm(m, k, n, 1.25, &a, ta, &b, tb, 0.75, &mut c1);
                gemm_naive(m, k, n, 1.25, &a, ta, &b, tb, 0.75, &mut c2);
                assert!(
                    max_abs_diff(&c1, &c2) < 1e-12,
                    "mismatch for ta={ta} tb={tb}"
                );
            }
        }
    }

    #[test]
    fn k_zero_scales_c_by_beta() {
        let mut c = vec![2.0, 4.0];
        gemm(1, 0, 2, 1.0, &[], false, &[], false, 0.5, &mut c);
        assert_eq!(c, vec![1.0, 2.0]);
    }
}
