//! 1-D sliding detector demo: raw correlation vs sharpened cosine
//! response for the same template.

/// Sharpening exponent used by the demo's scs mode.
pub const DEMO_P: f64 = 2.0;
/// Smoothing term used by the demo's scs mode.
pub const DEMO_Q: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DetectorMode {
    Conv,
    Scs,
}

impl DetectorMode {
    pub fn name(self) -> &'static str {
        match self {
            DetectorMode::Conv => "conv",
            DetectorMode::Scs => "scs",
        }
    }
}

/// Slides `kernel` over `signal` producing one response per valid
/// offset (`signal.len() - kernel.len() + 1` of them).
///
/// Conv mode is the raw sliding dot product. Scs mode is
/// `sign(u)·|u/((‖s‖+q)‖k‖)|^p` with `u = s·k`, `p = 2`, `q = 1e-6`,
/// bounded in [-1,1] and invariant to positive rescaling of either
/// the kernel or the window.
pub fn detector_response_1d(kernel: &[f64], signal: &[f64], mode: DetectorMode) -> Vec<f64> {
    assert!(
        !kernel.is_empty() && kernel.len() <= signal.len(),
        "kernel of {} over signal of {}",
        kernel.len(),
        signal.len()
    );
    let k_norm = kernel.iter().map(|v| v * v).sum::<f64>().sqrt();
    let n = signal.len() - kernel.len() + 1;
    (0..n)
        .map(|offset| {
            let window = &signal[offset..offset + kernel.len()];
            let u: f64 = window.iter().zip(kernel).map(|(s, k)| s * k).sum();
            match mode {
                DetectorMode::Conv => u,
                DetectorMode::Scs => {
                    if k_norm == 0.0 {
                        return 0.0;
                    }
                    let s_norm = window.iter().map(|v| v * v).sum::<f64>().sqrt();
                    let sim = u / ((s_norm + DEMO_Q) * k_norm);
                    sim.signum() * sim.abs().powf(DEMO_P)
                }
            }
        })
        .collect()
}
