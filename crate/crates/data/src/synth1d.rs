//! One-dimensional demo signals for the feature-detection illustration:
//! a fixed 8-sample template optionally embedded in a length-64 signal.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub const SIGNAL_LEN: usize = 64;
pub const TEMPLATE_LEN: usize = 8;

/// The embedded waveform. Chosen with norm > 2 so that a smoothed cosine
/// detector's perfect-match response stays within 1e-6 of 1.
pub const TEMPLATE_1D: [f64; TEMPLATE_LEN] = [0.0, 1.0, 2.0, 1.0, -1.0, -2.0, -1.0, 0.0];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SignalKind {
    FeaturePresent,
    FeatureAbsent,
}

/// A generated signal plus its ground truth.
#[derive(Debug, Clone, PartialEq)]
pub struct Signal1d {
    pub values: Vec<f64>,
    /// True where the template was written.
    pub mask: Vec<bool>,
    /// Start of the template, when present.
    pub offset: Option<usize>,
}

/// Builds a length-64 signal: zeros, plus the template at a random offset
/// when `kind` embeds it, plus i.i.d. Gaussian noise of deviation `sigma`.
pub fn synth_1d_signal(kind: SignalKind, sigma: f64, seed: u64) -> Signal1d {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut values = vec![0.0; SIGNAL_LEN];
    let mut mask = vec![false; SIGNAL_LEN];
    let offset = match kind {
        SignalKind::FeaturePresent => {
            let at = rng.gen_range(0..=SIGNAL_LEN - TEMPLATE_LEN);
            for (k, &t) in TEMPLATE_1D.iter().enumerate() {
                values[at + k] = t;
                mask[at + k] = true;
            }
            Some(at)
        }
        SignalKind::FeatureAbsent => None,
    };
    if sigma > 0.0 {
        for v in &mut values {
            *v += sigma * standard_normal(&mut rng);
        }
    }
    Signal1d {
        values,
        mask,
        offset,
    }
}

/// Box-Muller standard normal draw.
fn standard_normal(rng: &mut ChaCha8Rng) -> f64 {
    let u1: f64 = rng.gen_range(f64::MIN_POSITIVE..1.0);
    let u2: f64 = rng.gen_range(0.0..1.0);
    (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn noiseless_present_embeds_template_verbatim() {
        let s = synth_1d_signal(SignalKind::FeaturePresent, 0.0, 5);
        let at = s.offset.unwrap();
        assert_eq!(&s.values[at..at + TEMPLATE_LEN], &TEMPLATE_1D);
        for (i, &m) in s.mask.iter().enumerate() {
            assert_eq!(m, (at..at + TEMPLATE_LEN).contains(&i));
            if !m {
                assert_eq!(s.values[i], 0.0);
            }
        }
    }

    #[test]
    fn noiseless_absent_is_flat_zero() {
        let s = synth_1d_signal(SignalKind::FeatureAbsent, 0.0, 5);
        assert!(s.values.iter().all(|&v| v == 0.0));
        assert!(s.mask.iter().all(|&m| !m));
        assert_eq!(s.offset, None);
    }

    #[test]
    fn generation_is_seed_deterministic() {
        let a = synth_1d_signal(SignalKind::FeaturePresent, 0.3, 11);
        let b = synth_1d_signal(SignalKind::FeaturePresent, 0.3, 11);
        assert_eq!(a, b);
        let c = synth_1d_signal(SignalKind::FeaturePresent, 0.3, 12);
        assert_ne!(a, c);
    }

    #[test]
    fn template_norm_exceeds_two() {
        let norm: f64 = TEMPLATE_1D.iter().map(|v| v * v).sum::<f64>().sqrt();
        assert!(norm > 2.0, "norm {norm}");
    }
}
