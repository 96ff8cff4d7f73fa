//! Deterministic subsetting for desk-scale experiments.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::dataset::{Dataset, SubsetInfo, NUM_CLASSES};
use crate::error::{DataError, Result};

/// Draws `n` examples. Stratified mode keeps per-class counts within one
/// of each other and selects by a content-keyed ranking, so the chosen
/// examples do not depend on the order records happened to be stored in.
pub fn subset(ds: &Dataset, n: usize, stratified: bool, seed: u64) -> Result<Dataset> {
    if n > ds.len() {
        return Err(DataError::Config(format!(
            "subset of {n} requested from dataset of {}",
            ds.len()
        )));
    }
    let indices = if stratified {
        stratified_indices(ds, n, seed)?
    } else {
        let mut all: Vec<usize> = (0..ds.len()).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        all.shuffle(&mut rng);
        all.truncate(n);
        all
    };
    Ok(ds
        .gather(&indices, ds.split())?
        .with_subset_info(SubsetInfo {
            count: n,
            stratified,
            seed,
        }))
}

fn stratified_indices(ds: &Dataset, n: usize, seed: u64) -> Result<Vec<usize>> {
    // per-class quotas: first (n % 10) classes take one extra
    let base = n / NUM_CLASSES;
    let rem = n % NUM_CLASSES;
    let mut quotas = [0usize; NUM_CLASSES];
    for (c, q) in quotas.iter_mut().enumerate() {
        *q = base + usize::from(c < rem);
    }
    let counts = ds.per_class_counts();
    for c in 0..NUM_CLASSES {
        if quotas[c] > counts[c] {
            return Err(DataError::Config(format!(
                "stratified subset needs {} examples of class {c}, dataset has {}",
                quotas[c], counts[c]
            )));
        }
    }
    // rank every example by a key derived from the seed and the record's
    // content; position only breaks exact-duplicate ties
    let mut keyed: Vec<Vec<(u64, usize)>> = vec![Vec::new(); NUM_CLASSES];
    for i in 0..ds.len() {
        keyed[ds.label(i)].push((record_key(seed, ds.label(i) as u8, ds.raw_image(i)), i));
    }
    let mut out = Vec::with_capacity(n);
    for c in 0..NUM_CLASSES {
        keyed[c].sort_unstable();
        out.extend(keyed[c].iter().take(quotas[c]).map(|&(_, i)| i));
    }
    out.sort_unstable();
    Ok(out)
}

fn record_key(seed: u64, label: u8, pixels: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf29ce484222325;
    let mut eat = |b: u8| {
        h ^= b as u64;
        h = h.wrapping_mul(0x100000001b3);
    };
    for b in seed.to_le_bytes() {
        eat(b);
    }
    eat(label);
    for &b in pixels {
        eat(b);
    }
    h
}
