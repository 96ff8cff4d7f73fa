//! The training loop: seeded shuffling, augmentation, Adam with a
//! one-cycle schedule, per-epoch evaluation and telemetry, and
//! initial/best/final checkpoints.

use std::path::Path;
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use scslab_data::{augment_batch, AugmentationConfig, Dataset, Standardizer, IMAGE_PIXELS};
use scslab_nn::ForwardMode;
use scslab_tensor::Tensor;
use scslab_zoo::Model;

use crate::checkpoint::save_checkpoint;
use crate::error::{Result, TrainError};
use crate::optim::{Adam, AdamConfig};
use crate::schedule::OneCycle;
use crate::telemetry::{track_norms, EpochRecord, TelemetryWriter};

pub const TELEMETRY_FILE: &str = "telemetry.csv";
pub const INITIAL_CKPT: &str = "initial.ckpt";
pub const BEST_CKPT: &str = "best.ckpt";
pub const FINAL_CKPT: &str = "final.ckpt";

/// Knobs for one training run.
#[derive(Debug, Clone)]
pub struct TrainSettings {
    pub epochs: usize,
    pub batch_size: usize,
    pub max_lr: f64,
    pub pct_start: f64,
    pub div_factor: f64,
    pub final_div_factor: f64,
    pub adam: AdamConfig,
    pub augment: AugmentationConfig,
    /// Standardize inputs with per-channel statistics fit on the
    /// training set.
    pub standardize: bool,
    /// Seed for shuffling and augmentation draws. Independent of the
    /// model seed so data order and weight init can vary separately.
    pub shuffle_seed: u64,
    /// Record 0.0 for both time columns, making telemetry output
    /// byte-reproducible across runs.
    pub zero_times: bool,
    /// Stop after the first epoch whose training accuracy reaches this
    /// value.
    pub stop_at_train_acc: Option<f64>,
}

impl Default for TrainSettings {
    fn default() -> TrainSettings {
        TrainSettings {
            epochs: 30,
            batch_size: 128,
            max_lr: 0.01,
            pct_start: 0.3,
            div_factor: 25.0,
            final_div_factor: 1e4,
            adam: AdamConfig::default(),
            augment: AugmentationConfig::default(),
            standardize: true,
            shuffle_seed: 0,
            zero_times: false,
            stop_at_train_acc: None,
        }
    }
}

/// What a finished (or early-stopped) run produced.
#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub records: Vec<EpochRecord>,
    pub best_test_acc: Option<f64>,
    /// 1-based epoch at which `best_test_acc` was reached.
    pub best_epoch: Option<usize>,
    pub optimizer_steps: u64,
    pub stopped_early: bool,
}

/// Mean loss and accuracy over a dataset, in inference mode, batched in
/// storage order.
pub fn evaluate(
    model: &Model,
    ds: &Dataset,
    batch_size: usize,
    std: Option<&Standardizer>,
) -> Result<(f64, f64)> {
    if batch_size == 0 {
        return Err(TrainError::Config("batch_size must be at least 1".into()));
    }
    if ds.is_empty() {
        return Err(TrainError::Config(
            "cannot evaluate on an empty dataset".into(),
        ));
    }
    let indices: Vec<usize> = (0..ds.len()).collect();
    let mut loss_sum = 0.0;
    let mut correct_sum = 0.0;
    for chunk in indices.chunks(batch_size) {
        let (x, labels) = assemble_batch(ds, chunk, std, None)?;
        let logits = model.forward(&x, ForwardMode::Eval)?;
        let loss = scslab_nn::cross_entropy_mean(&logits, &labels)?;
        let b = chunk.len() as f64;
        loss_sum += loss.item()? * b;
        correct_sum += scslab_nn::accuracy(&logits, &labels)? * b;
    }
    let n = ds.len() as f64;
    Ok((loss_sum / n, correct_sum / n))
}

/// Builds a `(B,3,32,32)` input tensor and its labels from dataset
/// records, applying augmentation (training only) and standardization.
fn assemble_batch(
    ds: &Dataset,
    indices: &[usize],
    std: Option<&Standardizer>,
    aug: Option<(&AugmentationConfig, &mut ChaCha8Rng)>,
) -> Result<(Tensor, Vec<usize>)> {
    let b = indices.len();
    let mut buf = vec![0.0; b * IMAGE_PIXELS];
    for (slot, &i) in indices.iter().enumerate() {
        ds.write_image_into(i, &mut buf[slot * IMAGE_PIXELS..(slot + 1) * IMAGE_PIXELS]);
    }
    if let Some((cfg, rng)) = aug {
        augment_batch(&mut buf, cfg, rng);
    }
    if let Some(std) = std {
        for image in buf.chunks_exact_mut(IMAGE_PIXELS) {
            std.apply(image);
        }
    }
    let x = Tensor::from_vec(buf, &[b, 3, 32, 32])?;
    let labels = indices.iter().map(|&i| ds.label(i) as usize).collect();
    Ok((x, labels))
}

/// Re-runs the failing batch layer by layer to name the first layer
/// whose output is non-finite.
fn diagnose_non_finite(model: &Model, x: &Tensor, where_: &str) -> TrainError {
    let context = match model.forward_traced(x, ForwardMode::Train) {
        Ok(trace) => {
            match trace
                .iter()
                .find(|(_, t)| t.assert_finite().is_err())
                .map(|(name, _)| name.clone())
            {
                Some(name) => {
                    format!("{where_}: first non-finite output in layer '{name}'")
                }
                None => format!("{where_}: loss is non-finite but layer outputs are finite"),
            }
        }
        Err(e) => format!("{where_}: loss is non-finite (retrace failed: {e})"),
    };
    TrainError::NonFinite { context }
}

fn validate(s: &TrainSettings) -> Result<()> {
    if s.batch_size == 0 {
        return Err(TrainError::Config("batch_size must be at least 1".into()));
    }
    if let Some(t) = s.stop_at_train_acc {
        if !(t > 0.0 && t <= 1.0) {
            return Err(TrainError::Config(format!(
                "stop_at_train_acc must be in (0, 1], got {t}"
            )));
        }
    }
    Ok(())
}

/// Trains `model` in place. When `out_dir` is given, writes
/// `telemetry.csv` plus `initial.ckpt` / `best.ckpt` / `final.ckpt`
/// there (the directory is created if needed).
pub fn train(
    model: &Model,
    train_ds: &Dataset,
    test_ds: &Dataset,
    settings: &TrainSettings,
    out_dir: Option<&Path>,
) -> Result<TrainOutcome> {
    validate(settings)?;
    if settings.epochs > 0 && train_ds.is_empty() {
        return Err(TrainError::Config(
            "cannot train on an empty dataset".into(),
        ));
    }

    let standardizer = settings.standardize.then(|| Standardizer::fit(train_ds));
    let std = standardizer.as_ref();

    let mut writer = match out_dir {
        Some(dir) => {
            std::fs::create_dir_all(dir).map_err(|e| TrainError::io(dir, e))?;
            save_checkpoint(model, 0, dir.join(INITIAL_CKPT))?;
            Some(TelemetryWriter::create(dir.join(TELEMETRY_FILE), model)?)
        }
        None => None,
    };

    let mut outcome = TrainOutcome {
        records: Vec::new(),
        best_test_acc: None,
        best_epoch: None,
        optimizer_steps: 0,
        stopped_early: false,
    };
    if settings.epochs == 0 {
        if let Some(dir) = out_dir {
            save_checkpoint(model, 0, dir.join(FINAL_CKPT))?;
        }
        return Ok(outcome);
    }

    let n = train_ds.len();
    let steps_per_epoch = n.div_ceil(settings.batch_size);
    let total_steps = settings.epochs * steps_per_epoch;
    let schedule = OneCycle::with_shape(
        settings.max_lr,
        total_steps,
        settings.pct_start,
        settings.div_factor,
        settings.final_div_factor,
    )?;
    let params = model.named_params();
    let mut optimizer = Adam::new(&params, settings.adam);

    let mut last_epoch = 0;
    for epoch in 1..=settings.epochs {
        let train_started = Instant::now();
        let mut shuffle_rng = ChaCha8Rng::seed_from_u64(settings.shuffle_seed);
        shuffle_rng.set_stream(2 * (epoch as u64 - 1));
        let mut aug_rng = ChaCha8Rng::seed_from_u64(settings.shuffle_seed);
        aug_rng.set_stream(2 * (epoch as u64 - 1) + 1);

        let mut order: Vec<usize> = (0..n).collect();
        order.shuffle(&mut shuffle_rng);

        let mut loss_sum = 0.0;
        let mut correct_sum = 0.0;
        for (step, chunk) in order.chunks(settings.batch_size).enumerate() {
            let aug = settings
                .augment
                .enabled
                .then_some((&settings.augment, &mut aug_rng));
            let (x, labels) = assemble_batch(train_ds, chunk, std, aug)?;
            model.zero_grads();
            let logits = model.forward(&x, ForwardMode::Train)?;
            let loss = scslab_nn::cross_entropy_mean(&logits, &labels)?;
            let loss_val = loss.item()?;
            if !loss_val.is_finite() {
                return Err(diagnose_non_finite(
                    model,
                    &x,
                    &format!("epoch {epoch} step {}", step + 1),
                ));
            }
            let b = chunk.len() as f64;
            loss_sum += loss_val * b;
            correct_sum += scslab_nn::accuracy(&logits, &labels)? * b;
            loss.backward()?;
            let lr = schedule.lr(outcome.optimizer_steps as usize);
            optimizer.step(&params, lr)?;
            outcome.optimizer_steps += 1;
        }
        let train_time = train_started.elapsed().as_secs_f64();
        let train_loss = loss_sum / n as f64;
        let train_acc = correct_sum / n as f64;

        let eval_started = Instant::now();
        let (test_loss, test_acc) = evaluate(model, test_ds, settings.batch_size, std)?;
        if !(test_loss.is_finite() && test_acc.is_finite()) {
            return Err(TrainError::NonFinite {
                context: format!("evaluation after epoch {epoch}"),
            });
        }
        let eval_time = eval_started.elapsed().as_secs_f64();

        let (train_time_s, eval_time_s) = if settings.zero_times {
            (0.0, 0.0)
        } else {
            (train_time, eval_time)
        };
        let record = EpochRecord {
            epoch,
            train_loss,
            train_acc,
            test_loss,
            test_acc,
            train_time_s,
            eval_time_s,
            layers: track_norms(model),
        };
        if let Some(w) = writer.as_mut() {
            w.write_record(&record)?;
        }

        let improved = outcome.best_test_acc.is_none_or(|b| test_acc > b);
        if improved {
            outcome.best_test_acc = Some(test_acc);
            outcome.best_epoch = Some(epoch);
            if let Some(dir) = out_dir {
                save_checkpoint(model, epoch as u32, dir.join(BEST_CKPT))?;
            }
        }
        outcome.records.push(record);
        last_epoch = epoch;

        if settings.stop_at_train_acc.is_some_and(|t| train_acc >= t) {
            outcome.stopped_early = true;
            break;
        }
    }

    if let Some(dir) = out_dir {
        save_checkpoint(model, last_epoch as u32, dir.join(FINAL_CKPT))?;
    }
    Ok(outcome)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn settings_validation_rejects_bad_stop_threshold() {
        let mut s = TrainSettings::default();
        s.stop_at_train_acc = Some(0.0);
        assert!(validate(&s).is_err());
        s.stop_at_train_acc = Some(1.5);
        assert!(validate(&s).is_err());
        s.stop_at_train_acc = Some(1.0);
        assert!(validate(&s).is_ok());
    }
}
