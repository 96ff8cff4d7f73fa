//! Saliency rendering: one PGM map plus a text sidecar per requested
//! image index.

use std::path::PathBuf;

use scslab_analysis::{
    saliency_map, sparsity_index, write_pgm, write_sidecar, SaliencyReduce,
};
use scslab_data::Standardizer;
use scslab_tensor::Tensor;
use scslab_train::load_checkpoint;

use super::{create_out_dir, refuse_clobber, Invocation};
use crate::config::write_snapshot;
use crate::datasrc::load_data;
use crate::error::{from_analysis, CliError, Result};

pub const SNAPSHOT_FILE: &str = "config.saliency.resolved";

pub fn cmd_saliency(inv: &Invocation) -> Result<()> {
    let cfg = &inv.config;
    let ckpt = cfg.text("saliency.checkpoint");
    if ckpt.is_empty() {
        return Err(CliError::Config(
            "saliency.checkpoint is not set; pass --checkpoint FILE \
             or --override saliency.checkpoint=FILE"
                .into(),
        ));
    }
    let indices: Vec<usize> = cfg.uints("saliency.indices").iter().map(|&i| i as usize).collect();
    let reduce = match cfg.text("saliency.reduction").as_str() {
        "mean_abs" => SaliencyReduce::MeanAbs,
        _ => SaliencyReduce::MaxAbs,
    };

    let snapshot = inv.out.join(SNAPSHOT_FILE);
    let files: Vec<(PathBuf, PathBuf)> = indices
        .iter()
        .map(|i| {
            (
                inv.out.join(format!("saliency_{i}.pgm")),
                inv.out.join(format!("saliency_{i}.txt")),
            )
        })
        .collect();
    let mut targets = vec![snapshot.clone()];
    for (pgm, txt) in &files {
        targets.push(pgm.clone());
        targets.push(txt.clone());
    }
    refuse_clobber(inv.force, &targets)?;

    let (model, _) = load_checkpoint(&ckpt).map_err(|e| CliError::Checkpoint(e.to_string()))?;
    let data = load_data(cfg)?;
    let split = cfg.text("saliency.split");
    let ds = if split == "train" { &data.train } else { &data.test };
    let std = cfg
        .flag("train.standardize")
        .then(|| Standardizer::fit(&data.train));

    let mut maps = Vec::with_capacity(indices.len());
    for &i in &indices {
        if i >= ds.len() {
            return Err(CliError::Config(format!(
                "saliency.indices: index {i} out of range (the {split} split has {} images)",
                ds.len()
            )));
        }
        let x = Tensor::from_vec(ds.image(i), &[1, 3, 32, 32])
            .map_err(|e| CliError::Config(e.to_string()))?;
        let map = saliency_map(&model, std.as_ref(), &x, i, ds.label(i), reduce)
            .map_err(from_analysis)?;
        maps.push(map);
    }

    create_out_dir(&inv.out)?;
    write_snapshot(cfg, "saliency", &snapshot)?;
    for (map, (pgm, txt)) in maps.iter().zip(&files) {
        write_pgm(pgm, map).map_err(from_analysis)?;
        write_sidecar(txt, map).map_err(from_analysis)?;
        println!(
            "wrote {} (class {}, logit {:.4}, sparsity {:.4})",
            pgm.display(),
            map.class_idx,
            map.logit,
            sparsity_index(map)
        );
    }
    Ok(())
}
