//! Per-epoch experiment records and their CSV serialization.
//!
//! Schema: the seven fixed columns
//! `epoch,train_loss,train_acc,test_loss,test_acc,train_time_s,eval_time_s`
//! followed, for each weight-bearing layer in architecture order, by
//! `<layer>.w_norm`, `<layer>.g_norm`, then `<layer>.p[k]` for sharpening
//! layers and `<layer>.q` for smoothing layers. UTF-8, `\n` endings.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use scslab_zoo::Model;

use crate::error::{Result, TrainError};

/// Snapshot of one layer's observable state.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerStat {
    pub layer: String,
    pub w_norm: f64,
    /// Zero until a gradient has been accumulated.
    pub g_norm: f64,
    /// Effective sharpening exponents, present on sharpening layers.
    pub p: Option<Vec<f64>>,
    /// Effective smoothing term, present on smoothing layers.
    pub q: Option<f64>,
}

/// One telemetry row.
#[derive(Debug, Clone, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub train_acc: f64,
    pub test_loss: f64,
    pub test_acc: f64,
    pub train_time_s: f64,
    pub eval_time_s: f64,
    pub layers: Vec<LayerStat>,
}

fn l2(values: &[f64]) -> f64 {
    values.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// Current weight/grad norms and effective p/q of every weight-bearing
/// leaf layer, in architecture order.
pub fn track_norms(model: &Model) -> Vec<LayerStat> {
    model
        .leaf_layers()
        .iter()
        .filter_map(|l| {
            let weight = l
                .params()
                .iter()
                .find(|(n, _)| n == "weight")
                .map(|(_, t)| t.clone())?;
            let w_norm = l2(&weight.data());
            Some(LayerStat {
                layer: l.layer_name().to_string(),
                w_norm,
                g_norm: weight.grad().map_or(0.0, |g| l2(&g)),
                p: l.sharpness(),
                q: l.smoothing(),
            })
        })
        .collect()
}

/// Expected stats shape for one layer, fixed at writer creation.
#[derive(Debug, Clone, PartialEq)]
struct LayerSchema {
    layer: String,
    p_len: Option<usize>,
    has_q: bool,
}

/// Streams epoch records to a CSV file, enforcing a schema derived from
/// the model at creation time.
pub struct TelemetryWriter {
    out: BufWriter<File>,
    path: PathBuf,
    schema: Vec<LayerSchema>,
}

/// Column names for a model, in row order.
pub fn csv_columns(model: &Model) -> Vec<String> {
    let mut cols: Vec<String> = [
        "epoch",
        "train_loss",
        "train_acc",
        "test_loss",
        "test_acc",
        "train_time_s",
        "eval_time_s",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect();
    for stat in track_norms(model) {
        cols.push(format!("{}.w_norm", stat.layer));
        cols.push(format!("{}.g_norm", stat.layer));
        if let Some(p) = &stat.p {
            for k in 0..p.len() {
                cols.push(format!("{}.p[{k}]", stat.layer));
            }
        }
        if stat.q.is_some() {
            cols.push(format!("{}.q", stat.layer));
        }
    }
    cols
}

impl TelemetryWriter {
    /// Creates the file and writes the header row.
    pub fn create(path: impl AsRef<Path>, model: &Model) -> Result<TelemetryWriter> {
        let path: PathBuf = path.as_ref().into();
        let file = File::create(&path).map_err(|e| TrainError::io(&path, e))?;
        let mut out = BufWriter::new(file);
        let header = csv_columns(model).join(",");
        writeln!(out, "{header}").map_err(|e| TrainError::io(&path, e))?;
        let schema = track_norms(model)
            .into_iter()
            .map(|s| LayerSchema {
                layer: s.layer,
                p_len: s.p.map(|p| p.len()),
                has_q: s.q.is_some(),
            })
            .collect();
        Ok(TelemetryWriter { out, path, schema })
    }

    /// Appends one row and flushes it to disk.
    pub fn write_record(&mut self, rec: &EpochRecord) -> Result<()> {
        let mut fields: Vec<String> = vec![
            rec.epoch.to_string(),
            fmt(rec.train_loss),
            fmt(rec.train_acc),
            fmt(rec.test_loss),
            fmt(rec.test_acc),
            fmt(rec.train_time_s),
            fmt(rec.eval_time_s),
        ];
        if rec.layers.len() != self.schema.len() {
            return Err(TrainError::Config(format!(
                "record carries {} layer stats, schema expects {}",
                rec.layers.len(),
                self.schema.len()
            )));
        }
        for (stat, schema) in rec.layers.iter().zip(&self.schema) {
            if stat.layer != schema.layer
                || stat.p.as_ref().map(Vec::len) != schema.p_len
                || stat.q.is_some() != schema.has_q
            {
                return Err(TrainError::Config(format!(
                    "layer stat '{}' does not match telemetry schema entry '{}'",
                    stat.layer, schema.layer
                )));
            }
            fields.push(fmt(stat.w_norm));
            fields.push(fmt(stat.g_norm));
            if let Some(p) = &stat.p {
                fields.extend(p.iter().map(|&v| fmt(v)));
            }
            if let Some(q) = stat.q {
                fields.push(fmt(q));
            }
        }
        writeln!(self.out, "{}", fields.join(",")).map_err(|e| TrainError::io(&self.path, e))?;
        self.out.flush().map_err(|e| TrainError::io(&self.path, e))
    }

    pub fn path(&self) -> &Path {
        &self.path
    }
}

/// Shortest round-trip decimal form (Rust's default float display).
fn fmt(v: f64) -> String {
    format!("{v}")
}
