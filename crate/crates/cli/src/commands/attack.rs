//! PGD robustness sweep: load a checkpoint, perturb test images at each
//! ε budget, write accuracy-vs-ε as CSV.

use scslab_analysis::{robustness_sweep, write_sweep_csv, AttackConfig};
use scslab_data::{Dataset, Standardizer};
use scslab_train::load_checkpoint;

use super::{create_out_dir, refuse_clobber, Invocation};
use crate::config::write_snapshot;
use crate::datasrc::load_data;
use crate::error::{from_analysis, CliError, Result};

pub const SWEEP_FILE: &str = "robustness.csv";
pub const SNAPSHOT_FILE: &str = "config.attack.resolved";

pub fn cmd_attack(inv: &Invocation) -> Result<()> {
    let cfg = &inv.config;
    let ckpt = cfg.text("attack.checkpoint");
    if ckpt.is_empty() {
        return Err(CliError::Config(
            "attack.checkpoint is not set; pass --checkpoint FILE \
             or --override attack.checkpoint=FILE"
                .into(),
        ));
    }
    let csv = inv.out.join(SWEEP_FILE);
    let snapshot = inv.out.join(SNAPSHOT_FILE);
    refuse_clobber(inv.force, &[csv.clone(), snapshot.clone()])?;

    let (model, epoch) =
        load_checkpoint(&ckpt).map_err(|e| CliError::Checkpoint(e.to_string()))?;
    let data = load_data(cfg)?;
    let std = cfg
        .flag("train.standardize")
        .then(|| Standardizer::fit(&data.train));

    let capped: Dataset;
    let max = cfg.count("attack.max_images");
    let eval_ds = if max > 0 && max < data.test.len() {
        let indices: Vec<usize> = (0..max).collect();
        capped = data
            .test
            .gather(&indices, "test")
            .map_err(|e| CliError::Data(e.to_string()))?;
        &capped
    } else {
        &data.test
    };

    let step = cfg.float("attack.step_size");
    let attack_cfg = AttackConfig {
        epsilons: cfg.floats("attack.epsilons"),
        steps: cfg.count("attack.steps"),
        step_size: (step > 0.0).then_some(step),
        random_start: cfg.flag("attack.random_start"),
        seed: cfg.uint("attack.seed"),
    };
    println!(
        "attacking {} (epoch {epoch}) over {} images",
        model.descriptor().variant,
        eval_ds.len()
    );
    let points = robustness_sweep(
        &model,
        std.as_ref(),
        eval_ds,
        &attack_cfg,
        cfg.count("attack.batch_size"),
    )
    .map_err(from_analysis)?;

    create_out_dir(&inv.out)?;
    write_snapshot(cfg, "attack", &snapshot)?;
    write_sweep_csv(&csv, &points).map_err(from_analysis)?;
    for p in &points {
        println!("eps {}: accuracy {} ({} images)", p.epsilon, p.accuracy, p.n_eval);
    }
    println!("wrote {}", csv.display());
    Ok(())
}
