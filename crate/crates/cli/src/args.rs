//! Command-line surface: global flags plus one subcommand per pipeline
//! stage.

use std::path::PathBuf;

use clap::{Parser, Subcommand};

/// Experiment driver for similarity-based convolution replacements:
/// train the variant grid, attack checkpoints, render saliency maps,
/// audit gradients, or run the 1-D detector demo.
#[derive(Debug, Parser)]
#[command(name = "scslab", version)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,

    /// Flat `key = value` config file; defaults apply when omitted.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,

    /// Directory holding the six CIFAR-10 binary batch files
    /// (shorthand for `data.dir`).
    #[arg(long, global = true, value_name = "DIR")]
    pub data_dir: Option<PathBuf>,

    /// Output directory; existing artifacts are never overwritten
    /// without --force.
    #[arg(long, global = true, default_value = "out", value_name = "DIR")]
    pub out: PathBuf,

    /// Shorthand for the command's seed key: grid.seeds (train),
    /// attack.seed, gradcheck.seed or demo1d.seed.
    #[arg(long, global = true)]
    pub seed: Option<u64>,

    /// Parallel worker processes for `train` grid cells.
    #[arg(long, global = true, default_value_t = 1)]
    pub jobs: usize,

    /// Overwrite existing artifacts.
    #[arg(long, global = true)]
    pub force: bool,

    /// Config override `key=value`; repeatable, applied after the file.
    #[arg(long = "override", global = true, value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train every cell of the variant grid; writes per-run telemetry,
    /// checkpoints and a summary table.
    Train {
        /// Process a single 0-based grid cell (spawned by --jobs).
        #[arg(long, hide = true)]
        cell: Option<usize>,
    },
    /// PGD robustness sweep against a trained checkpoint.
    Attack {
        /// Checkpoint to attack (shorthand for `attack.checkpoint`).
        #[arg(long, value_name = "FILE")]
        checkpoint: Option<PathBuf>,
    },
    /// Vanilla-gradient saliency maps for selected images.
    Saliency {
        /// Checkpoint to explain (shorthand for `saliency.checkpoint`).
        #[arg(long, value_name = "FILE")]
        checkpoint: Option<PathBuf>,
    },
    /// Finite-difference audit of every differentiable op.
    Gradcheck,
    /// 1-D detector-response comparison: conv vs scs.
    Demo1d,
}

impl Command {
    /// Name used in artifact files and snapshot comments.
    pub fn name(&self) -> &'static str {
        match self {
            Command::Train { .. } => "train",
            Command::Attack { .. } => "attack",
            Command::Saliency { .. } => "saliency",
            Command::Gradcheck => "gradcheck",
            Command::Demo1d => "demo1d",
        }
    }
}
