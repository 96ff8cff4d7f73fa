//! Model analysis: PGD adversarial attacks and robustness sweeps,
//! vanilla-gradient saliency maps with a Gini concentration index,
//! a finite-difference audit of every backward pass, and the 1-D
//! detector-response demo.

mod attack;
mod detector;
mod error;
mod gradcheck;
mod saliency;
mod sparsity;

pub use attack::{
    default_epsilons, log_spaced, pgd_attack, pgd_attack_with, raw_batch, robustness_sweep,
    standardized_forward, write_sweep_csv, AttackConfig, SweepPoint,
};
pub use detector::{detector_response_1d, DetectorMode, DEMO_P, DEMO_Q};
pub use error::{AnalysisError, Result};
pub use gradcheck::{gradcheck_suite, op_names, GradCheckReport, OpReport, GRADCHECK_TOL};
pub use saliency::{
    saliency_map, saliency_map_with, write_pgm, write_sidecar, SaliencyMap, SaliencyReduce,
};
pub use sparsity::{gini, sparsity_index};
