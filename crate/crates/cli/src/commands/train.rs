//! Grid training: every (layer kind × activation × pooling ×
//! normalization × seed) combination becomes one run directory plus a
//! row in `summary.csv`.

use std::collections::VecDeque;
use std::fs;
use std::path::Path;
use std::process::Child;
use std::time::Duration;

use scslab_data::AugmentationConfig;
use scslab_nn::{PMode, QMode};
use scslab_train::{train, AdamConfig, TrainOutcome, TrainSettings};
use scslab_zoo::{build_model, LayerVariantConfig, Model};

use super::{create_out_dir, refuse_clobber, Invocation};
use crate::config::{write_snapshot, Config};
use crate::datasrc::{load_data, LoadedData};
use crate::error::{from_train, CliError, Result};

pub const SUMMARY_FILE: &str = "summary.csv";
pub const SNAPSHOT_FILE: &str = "config.train.resolved";
/// Per-run summary fragment; the parent merges them in grid order.
const ROW_FRAGMENT: &str = "summary_row.csv";

const SUMMARY_HEADER: &str = "arch,layer,activation,pooling,normalization,p_mode,q_mode,seed,\
                              params,flagged,best_test_acc,best_epoch,mean_train_time_s,\
                              mean_eval_time_s";

/// One grid cell: its position, variant config and run directory name.
pub struct RunSpec {
    pub index: usize,
    pub variant: LayerVariantConfig,
    pub dir_name: String,
}

/// Expands the grid axes into runs, in a fixed canonical order
/// (kind, activation, pooling, normalization, seed — last axis fastest).
pub fn grid_runs(cfg: &Config) -> Result<Vec<RunSpec>> {
    let p_mode = cfg.p_mode()?;
    let q_mode = cfg.q_mode()?;
    let arch = cfg.text("model.arch_family");
    let mut runs = Vec::new();
    for kind in cfg.texts("grid.layer_kinds") {
        for act in cfg.texts("grid.activations") {
            for pool in cfg.texts("grid.poolings") {
                for norm in cfg.texts("grid.normalizations") {
                    for &seed in &cfg.uints("grid.seeds") {
                        let variant = LayerVariantConfig {
                            layer_kind: kind.clone(),
                            activation: act.clone(),
                            pooling: pool.clone(),
                            normalization: norm.clone(),
                            p_mode,
                            q_mode,
                            arch_family: arch.clone(),
                            seed,
                        };
                        runs.push(RunSpec {
                            index: runs.len(),
                            dir_name: format!("{}-seed{}", variant.cell_label(), seed),
                            variant,
                        });
                    }
                }
            }
        }
    }
    Ok(runs)
}

/// Maps the `train.*`, `augment.*` and `telemetry.*` keys onto the
/// training loop's settings.
pub fn train_settings(cfg: &Config) -> TrainSettings {
    let stop = cfg.float("train.stop_at_train_acc");
    TrainSettings {
        epochs: cfg.count("train.epochs"),
        batch_size: cfg.count("train.batch_size"),
        max_lr: cfg.float("train.max_lr"),
        pct_start: cfg.float("train.pct_start"),
        div_factor: cfg.float("train.div_factor"),
        final_div_factor: cfg.float("train.final_div_factor"),
        adam: AdamConfig {
            beta1: cfg.float("train.beta1"),
            beta2: cfg.float("train.beta2"),
            eps: cfg.float("train.adam_eps"),
            weight_decay: cfg.float("train.weight_decay"),
        },
        augment: AugmentationConfig {
            pad: cfg.count("augment.pad"),
            flip_prob: cfg.float("augment.flip_prob"),
            enabled: cfg.flag("augment.enabled"),
        },
        standardize: cfg.flag("train.standardize"),
        shuffle_seed: cfg.uint("train.shuffle_seed"),
        zero_times: cfg.flag("telemetry.zero_times"),
        stop_at_train_acc: (stop > 0.0).then_some(stop),
    }
}

pub fn cmd_train(inv: &Invocation, cell: Option<usize>) -> Result<()> {
    let runs = grid_runs(&inv.config)?;

    // Worker mode: the parent already guarded clobbering and wrote the
    // snapshot; process exactly one cell.
    if let Some(i) = cell {
        let spec = runs.get(i).ok_or_else(|| {
            CliError::Config(format!("--cell {i} out of range ({} grid cells)", runs.len()))
        })?;
        let data = load_data(&inv.config)?;
        return run_one(inv, &data, spec);
    }

    let snapshot = inv.out.join(SNAPSHOT_FILE);
    let summary = inv.out.join(SUMMARY_FILE);
    let mut targets = vec![snapshot.clone(), summary.clone()];
    targets.extend(runs.iter().map(|r| inv.out.join(&r.dir_name)));
    refuse_clobber(inv.force, &targets)?;

    let data = load_data(&inv.config)?;
    create_out_dir(&inv.out)?;
    for run in &runs {
        let dir = inv.out.join(&run.dir_name);
        if dir.exists() {
            fs::remove_dir_all(&dir).map_err(|e| CliError::io(&dir, e))?;
        }
    }
    write_snapshot(&inv.config, "train", &snapshot)?;
    println!(
        "training {} grid cell(s) on {} train / {} test images ({})",
        runs.len(),
        data.train.len(),
        data.test.len(),
        data.source
    );

    if inv.jobs > 1 && runs.len() > 1 {
        run_workers(inv, &runs, &snapshot)?;
    } else {
        for spec in &runs {
            run_one(inv, &data, spec)?;
        }
    }

    merge_summary(&inv.out, &runs, &summary)?;
    println!("wrote {} ({} rows)", summary.display(), runs.len());
    Ok(())
}

/// Trains one cell into its run directory and writes its summary
/// fragment.
fn run_one(inv: &Invocation, data: &LoadedData, spec: &RunSpec) -> Result<()> {
    let model = build_model(&spec.variant).map_err(|e| CliError::Config(e.to_string()))?;
    let run_dir = inv.out.join(&spec.dir_name);
    create_out_dir(&run_dir)?;
    let settings = train_settings(&inv.config);
    let outcome =
        train(&model, &data.train, &data.test, &settings, Some(&run_dir)).map_err(from_train)?;
    let fragment = run_dir.join(ROW_FRAGMENT);
    let row = summary_row(spec, &model, &outcome);
    fs::write(&fragment, format!("{SUMMARY_HEADER}\n{row}\n"))
        .map_err(|e| CliError::io(&fragment, e))?;
    match (outcome.best_test_acc, outcome.best_epoch) {
        (Some(acc), Some(epoch)) => println!(
            "[cell {}] {}: best test acc {acc:.4} at epoch {epoch}{}",
            spec.index,
            spec.dir_name,
            if outcome.stopped_early { " (stopped early)" } else { "" }
        ),
        _ => println!("[cell {}] {}: no epochs trained", spec.index, spec.dir_name),
    }
    Ok(())
}

/// Dispatches cells to `--jobs` child processes, reusing this executable
/// with `--cell N` against the already-written snapshot. Waits for all
/// workers; the lowest-index failure decides the exit code.
fn run_workers(inv: &Invocation, runs: &[RunSpec], snapshot: &Path) -> Result<()> {
    let exe = std::env::current_exe()
        .map_err(|e| CliError::Config(format!("cannot locate the worker executable: {e}")))?;
    let mut pending: VecDeque<usize> = (0..runs.len()).collect();
    let mut active: Vec<(usize, Child)> = Vec::new();
    let mut failed: Option<(usize, i32)> = None;
    loop {
        while active.len() < inv.jobs {
            let Some(i) = pending.pop_front() else { break };
            let child = std::process::Command::new(&exe)
                .arg("train")
                .arg("--config")
                .arg(snapshot)
                .arg("--out")
                .arg(&inv.out)
                .arg("--force")
                .arg("--cell")
                .arg(i.to_string())
                .spawn()
                .map_err(|e| CliError::Config(format!("failed to spawn worker: {e}")))?;
            active.push((i, child));
        }
        if active.is_empty() {
            break;
        }
        let mut running = Vec::new();
        for (i, mut child) in active {
            match child.try_wait() {
                Ok(Some(status)) if status.success() => {}
                Ok(Some(status)) => {
                    let code = status.code().unwrap_or(2);
                    if failed.map_or(true, |(cell, _)| i < cell) {
                        failed = Some((i, code));
                    }
                }
                Ok(None) => running.push((i, child)),
                Err(e) => {
                    return Err(CliError::Config(format!("failed to wait on worker {i}: {e}")))
                }
            }
        }
        active = running;
        if !active.is_empty() {
            std::thread::sleep(Duration::from_millis(20));
        }
    }
    match failed {
        Some((cell, code)) => Err(CliError::Worker { cell, code }),
        None => Ok(()),
    }
}

/// Concatenates the per-run fragments into `summary.csv`, in grid order.
fn merge_summary(out: &Path, runs: &[RunSpec], summary: &Path) -> Result<()> {
    let mut body = String::from(SUMMARY_HEADER);
    body.push('\n');
    for run in runs {
        let fragment = out.join(&run.dir_name).join(ROW_FRAGMENT);
        let text = fs::read_to_string(&fragment).map_err(|e| {
            CliError::Config(format!("missing summary for cell {}: {e}", run.index))
        })?;
        let row = text.lines().nth(1).ok_or_else(|| {
            CliError::Config(format!("summary fragment {} has no row", fragment.display()))
        })?;
        body.push_str(row);
        body.push('\n');
    }
    fs::write(summary, body).map_err(|e| CliError::io(summary, e))
}

/// Renders one summary row. Accuracy and per-epoch time fields are empty
/// when no epochs ran.
fn summary_row(spec: &RunSpec, model: &Model, outcome: &TrainOutcome) -> String {
    let v = &spec.variant;
    let d = model.descriptor();
    let flagged = if d.flags.is_empty() { "" } else { "degraded" };
    let p = match v.p_mode {
        PMode::Learned => "learned".to_string(),
        PMode::Fixed(x) => format!("fixed({x})"),
    };
    let q = match v.q_mode {
        QMode::Learned => "learned".to_string(),
        QMode::Fixed(x) => format!("fixed({x})"),
    };
    let n = outcome.records.len();
    let (best_acc, best_epoch, train_mean, eval_mean) = if n == 0 {
        (String::new(), String::new(), String::new(), String::new())
    } else {
        let mean = |f: fn(&scslab_train::EpochRecord) -> f64| {
            let total: f64 = outcome.records.iter().map(f).sum();
            format!("{}", total / n as f64)
        };
        (
            outcome.best_test_acc.map(|a| a.to_string()).unwrap_or_default(),
            outcome.best_epoch.map(|e| e.to_string()).unwrap_or_default(),
            mean(|r| r.train_time_s),
            mean(|r| r.eval_time_s),
        )
    };
    format!(
        "{},{},{},{},{},{p},{q},{},{},{flagged},{best_acc},{best_epoch},{train_mean},{eval_mean}",
        v.arch_family,
        v.layer_kind,
        v.activation,
        v.pooling,
        v.normalization,
        v.seed,
        d.total_params,
    )
}
