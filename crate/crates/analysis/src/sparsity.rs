//! Gini concentration index over attribution mass.

use crate::saliency::SaliencyMap;

/// Gini coefficient of a non-negative mass vector: 0 for uniform mass,
/// approaching 1 as everything concentrates in one cell. Zero or empty
/// mass yields 0.
///
/// Computed as the mean absolute pairwise difference normalized by
/// twice the mean, on sorted values — so uniform input is exactly 0
/// (every difference vanishes) and the result is permutation-invariant.
pub fn gini(values: &[f64]) -> f64 {
    let n = values.len();
    if n == 0 {
        return 0.0;
    }
    let mut sorted: Vec<f64> = values.iter().map(|v| v.max(0.0)).collect();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let total: f64 = sorted.iter().sum();
    if total <= 0.0 {
        return 0.0;
    }
    let mut diff_sum = 0.0;
    for (j, &xj) in sorted.iter().enumerate() {
        for &xi in &sorted[..j] {
            diff_sum += xj - xi;
        }
    }
    diff_sum / (n as f64 * total)
}

/// Gini index of a saliency map's attribution mass.
pub fn sparsity_index(map: &SaliencyMap) -> f64 {
    gini(&map.grid)
}
