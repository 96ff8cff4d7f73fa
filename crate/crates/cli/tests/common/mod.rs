#![allow(dead_code)]

//! Shared helpers for driving the `scslab` binary in integration tests.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

/// Path to the compiled `scslab` binary under test.
pub const BIN: &str = env!("CARGO_BIN_EXE_scslab");

/// Runs the binary with the given arguments and captures its output.
pub fn scslab(args: &[&str]) -> Output {
    Command::new(BIN)
        .args(args)
        .output()
        .expect("failed to launch the scslab binary")
}

pub fn code(out: &Output) -> i32 {
    out.status.code().expect("process was killed by a signal")
}

pub fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

pub fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

/// A one-cell synthetic-data grid small enough to train in well under a
/// second, with timing columns zeroed so outputs are byte-reproducible.
pub const TINY_CFG: &str = "\
data.source = synthetic
data.train_count = 60
data.test_count = 20
grid.layer_kinds = conv
grid.activations = relu
grid.poolings = maxpool
grid.normalizations = none
grid.seeds = 0
train.epochs = 1
train.batch_size = 32
telemetry.zero_times = true
";

/// Writes `TINY_CFG` (plus any extra lines) into `dir` and returns its path.
pub fn write_config(dir: &Path, extra: &str) -> PathBuf {
    let path = dir.join("tiny.cfg");
    std::fs::write(&path, format!("{TINY_CFG}{extra}")).unwrap();
    path
}

/// Trains the tiny one-cell grid into `dir/train-out` and returns that
/// output directory. Panics if the run fails.
pub fn tiny_train(dir: &Path) -> PathBuf {
    let cfg = write_config(dir, "");
    let out = dir.join("train-out");
    let res = scslab(&["train", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(code(&res), 0, "tiny training run failed: {}", stderr(&res));
    out
}

/// The run directory the tiny grid's single cell writes into.
pub fn tiny_run_dir(out: &Path) -> PathBuf {
    out.join("rohrer_small-conv-relu-maxpool-none-seed0")
}

pub fn read(path: &Path) -> String {
    std::fs::read_to_string(path)
        .unwrap_or_else(|e| panic!("cannot read {}: {e}", path.display()))
}

/// Splits a CSV body into non-empty lines.
pub fn csv_lines(text: &str) -> Vec<&str> {
    text.lines().filter(|l| !l.is_empty()).collect()
}
