//! Flat dotted-key configuration: every knob is a `section.key = value`
//! line, all keys have explicit defaults, and a resolved snapshot
//! reparses to the identical configuration.

use std::collections::BTreeMap;
use std::path::Path;

use scslab_nn::{PMode, QMode};

use crate::error::{CliError, Result};

/// A typed configuration value.
#[derive(Debug, Clone, PartialEq)]
pub enum Value {
    UInt(u64),
    Float(f64),
    Bool(bool),
    Str(String),
    UIntList(Vec<u64>),
    FloatList(Vec<f64>),
    StrList(Vec<String>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Kind {
    UInt,
    Float,
    Bool,
    Str,
    UIntList,
    FloatList,
    StrList,
}

/// Every recognized key, in snapshot order. Values not listed here are
/// rejected with the offending key path.
const SCHEMA: &[(&str, Kind)] = &[
    ("data.dir", Kind::Str),
    ("data.source", Kind::Str),
    ("data.train_count", Kind::UInt),
    ("data.test_count", Kind::UInt),
    ("data.stratified", Kind::Bool),
    ("data.subset_seed", Kind::UInt),
    ("data.synthetic_seed", Kind::UInt),
    ("model.arch_family", Kind::Str),
    ("model.p_mode", Kind::Str),
    ("model.q_mode", Kind::Str),
    ("grid.layer_kinds", Kind::StrList),
    ("grid.activations", Kind::StrList),
    ("grid.poolings", Kind::StrList),
    ("grid.normalizations", Kind::StrList),
    ("grid.seeds", Kind::UIntList),
    ("train.epochs", Kind::UInt),
    ("train.batch_size", Kind::UInt),
    ("train.max_lr", Kind::Float),
    ("train.pct_start", Kind::Float),
    ("train.div_factor", Kind::Float),
    ("train.final_div_factor", Kind::Float),
    ("train.beta1", Kind::Float),
    ("train.beta2", Kind::Float),
    ("train.adam_eps", Kind::Float),
    ("train.weight_decay", Kind::Float),
    ("train.standardize", Kind::Bool),
    ("train.shuffle_seed", Kind::UInt),
    ("train.stop_at_train_acc", Kind::Float),
    ("augment.enabled", Kind::Bool),
    ("augment.pad", Kind::UInt),
    ("augment.flip_prob", Kind::Float),
    ("telemetry.zero_times", Kind::Bool),
    ("attack.checkpoint", Kind::Str),
    ("attack.epsilons", Kind::FloatList),
    ("attack.steps", Kind::UInt),
    ("attack.step_size", Kind::Float),
    ("attack.random_start", Kind::Bool),
    ("attack.seed", Kind::UInt),
    ("attack.batch_size", Kind::UInt),
    ("attack.max_images", Kind::UInt),
    ("saliency.checkpoint", Kind::Str),
    ("saliency.indices", Kind::UIntList),
    ("saliency.reduction", Kind::Str),
    ("saliency.split", Kind::Str),
    ("gradcheck.instances", Kind::UInt),
    ("gradcheck.seed", Kind::UInt),
    ("demo1d.sigma", Kind::Float),
    ("demo1d.seed", Kind::UInt),
];

fn default_value(key: &str) -> Value {
    match key {
        "data.dir" => Value::Str(String::new()),
        "data.source" => Value::Str("auto".into()),
        "data.train_count" => Value::UInt(4000),
        "data.test_count" => Value::UInt(1000),
        "data.stratified" => Value::Bool(true),
        "data.subset_seed" => Value::UInt(0),
        "data.synthetic_seed" => Value::UInt(0),
        "model.arch_family" => Value::Str("rohrer_small".into()),
        "model.p_mode" => Value::Str("learned".into()),
        "model.q_mode" => Value::Str("learned".into()),
        "grid.layer_kinds" => Value::StrList(vec!["conv".into()]),
        "grid.activations" => Value::StrList(vec!["relu".into()]),
        "grid.poolings" => Value::StrList(vec!["maxpool".into()]),
        "grid.normalizations" => Value::StrList(vec!["none".into()]),
        "grid.seeds" => Value::UIntList(vec![0]),
        "train.epochs" => Value::UInt(30),
        "train.batch_size" => Value::UInt(128),
        "train.max_lr" => Value::Float(0.01),
        "train.pct_start" => Value::Float(0.3),
        "train.div_factor" => Value::Float(25.0),
        "train.final_div_factor" => Value::Float(1e4),
        "train.beta1" => Value::Float(0.9),
        "train.beta2" => Value::Float(0.999),
        "train.adam_eps" => Value::Float(1e-8),
        "train.weight_decay" => Value::Float(0.0),
        "train.standardize" => Value::Bool(true),
        "train.shuffle_seed" => Value::UInt(0),
        "train.stop_at_train_acc" => Value::Float(0.0),
        "augment.enabled" => Value::Bool(true),
        "augment.pad" => Value::UInt(4),
        "augment.flip_prob" => Value::Float(0.5),
        "telemetry.zero_times" => Value::Bool(false),
        "attack.checkpoint" => Value::Str(String::new()),
        "attack.epsilons" => Value::FloatList(scslab_analysis::default_epsilons()),
        "attack.steps" => Value::UInt(10),
        "attack.step_size" => Value::Float(0.0),
        "attack.random_start" => Value::Bool(false),
        "attack.seed" => Value::UInt(0),
        "attack.batch_size" => Value::UInt(100),
        "attack.max_images" => Value::UInt(200),
        "saliency.checkpoint" => Value::Str(String::new()),
        "saliency.indices" => Value::UIntList(vec![0, 1, 2]),
        "saliency.reduction" => Value::Str("max_abs".into()),
        "saliency.split" => Value::Str("test".into()),
        "gradcheck.instances" => Value::UInt(20),
        "gradcheck.seed" => Value::UInt(0),
        "demo1d.sigma" => Value::Float(0.0),
        "demo1d.seed" => Value::UInt(0),
        other => unreachable!("no default for schema key {other}"),
    }
}

/// A fully-resolved configuration: every schema key is present.
#[derive(Debug, Clone, PartialEq)]
pub struct Config {
    map: BTreeMap<&'static str, Value>,
}

impl Default for Config {
    fn default() -> Self {
        let map = SCHEMA
            .iter()
            .map(|&(key, _)| (key, default_value(key)))
            .collect();
        Config { map }
    }
}

impl Config {
    /// Sets one key from raw text, validating the key path and value type.
    pub fn set(&mut self, key: &str, raw: &str) -> Result<()> {
        let (key, kind) = SCHEMA
            .iter()
            .find(|&&(k, _)| k == key)
            .copied()
            .ok_or_else(|| CliError::Config(format!("unknown config key '{key}'")))?;
        let value = parse_value(key, kind, raw)?;
        self.map.insert(key, value);
        Ok(())
    }

    /// Applies a `key = value` file on top of the current values.
    pub fn apply_file(&mut self, path: &Path) -> Result<()> {
        let text = std::fs::read_to_string(path).map_err(|e| {
            CliError::Config(format!("cannot read config file {}: {e}", path.display()))
        })?;
        for (line_no, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, raw) = line.split_once('=').ok_or_else(|| {
                CliError::Config(format!(
                    "{}:{}: expected 'key = value', got '{line}'",
                    path.display(),
                    line_no + 1
                ))
            })?;
            self.set(key.trim(), raw.trim()).map_err(|e| {
                CliError::Config(format!("{}:{}: {e}", path.display(), line_no + 1))
            })?;
        }
        Ok(())
    }

    /// Cross-field checks beyond per-value typing; every failure names
    /// the offending key.
    pub fn validate(&self) -> Result<()> {
        self.expect_choice("data.source", &["auto", "cifar10", "synthetic"])?;
        self.expect_choice("model.arch_family", scslab_zoo::ARCH_FAMILIES)?;
        self.p_mode()?;
        self.q_mode()?;
        self.expect_list_choices("grid.layer_kinds", &["conv", "cossim", "scs", "sdp"])?;
        self.expect_list_choices("grid.activations", &["relu", "none"])?;
        self.expect_list_choices("grid.poolings", &["maxpool", "maxabspool"])?;
        self.expect_list_choices("grid.normalizations", &["batchnorm", "none"])?;
        expect_distinct("grid.seeds", &self.uints("grid.seeds"))?;
        expect_distinct("saliency.indices", &self.uints("saliency.indices"))?;
        self.expect_choice("saliency.reduction", &["max_abs", "mean_abs"])?;
        self.expect_choice("saliency.split", &["train", "test"])?;
        if self.floats("attack.epsilons").is_empty() {
            return Err(CliError::Config(
                "config key 'attack.epsilons': list must not be empty".into(),
            ));
        }
        Ok(())
    }

    pub fn uint(&self, key: &str) -> u64 {
        match self.get(key) {
            Value::UInt(v) => *v,
            _ => unreachable!("{key} is not an unsigned integer"),
        }
    }

    pub fn count(&self, key: &str) -> usize {
        self.uint(key) as usize
    }

    pub fn float(&self, key: &str) -> f64 {
        match self.get(key) {
            Value::Float(v) => *v,
            _ => unreachable!("{key} is not a float"),
        }
    }

    pub fn flag(&self, key: &str) -> bool {
        match self.get(key) {
            Value::Bool(v) => *v,
            _ => unreachable!("{key} is not a bool"),
        }
    }

    pub fn text(&self, key: &str) -> String {
        match self.get(key) {
            Value::Str(v) => v.clone(),
            _ => unreachable!("{key} is not a string"),
        }
    }

    pub fn uints(&self, key: &str) -> Vec<u64> {
        match self.get(key) {
            Value::UIntList(v) => v.clone(),
            _ => unreachable!("{key} is not an integer list"),
        }
    }

    pub fn floats(&self, key: &str) -> Vec<f64> {
        match self.get(key) {
            Value::FloatList(v) => v.clone(),
            _ => unreachable!("{key} is not a float list"),
        }
    }

    pub fn texts(&self, key: &str) -> Vec<String> {
        match self.get(key) {
            Value::StrList(v) => v.clone(),
            _ => unreachable!("{key} is not a string list"),
        }
    }

    /// Sharpening-exponent mode from `model.p_mode`.
    pub fn p_mode(&self) -> Result<PMode> {
        parse_mode(&self.text("model.p_mode"), "model.p_mode")
            .map(|o| o.map_or(PMode::Learned, PMode::Fixed))
    }

    /// Smoothing-term mode from `model.q_mode`.
    pub fn q_mode(&self) -> Result<QMode> {
        parse_mode(&self.text("model.q_mode"), "model.q_mode")
            .map(|o| o.map_or(QMode::Learned, QMode::Fixed))
    }

    /// Renders every key in schema order; reparsing the result yields an
    /// identical configuration.
    pub fn snapshot(&self, command: &str) -> String {
        let mut out = String::new();
        out.push_str("# resolved configuration (every key explicit; no hidden defaults)\n");
        out.push_str(&format!(
            "# reproduce with: scslab {command} --config <this file>\n"
        ));
        for &(key, _) in SCHEMA {
            out.push_str(&format!("{key} = {}\n", render(self.get(key))));
        }
        out
    }

    fn get(&self, key: &str) -> &Value {
        self.map
            .get(key)
            .unwrap_or_else(|| unreachable!("schema key {key} missing from resolved config"))
    }

    fn expect_choice(&self, key: &str, allowed: &[&str]) -> Result<()> {
        let v = self.text(key);
        if allowed.contains(&v.as_str()) {
            return Ok(());
        }
        Err(CliError::Config(format!(
            "config key '{key}': expected one of {allowed:?}, got '{v}'"
        )))
    }

    fn expect_list_choices(&self, key: &str, allowed: &[&str]) -> Result<()> {
        let values = self.texts(key);
        for v in &values {
            if !allowed.contains(&v.as_str()) {
                return Err(CliError::Config(format!(
                    "config key '{key}': expected entries from {allowed:?}, got '{v}'"
                )));
            }
        }
        expect_distinct(key, &values)
    }
}

fn expect_distinct<T: PartialEq + std::fmt::Display>(key: &str, values: &[T]) -> Result<()> {
    if values.is_empty() {
        return Err(CliError::Config(format!(
            "config key '{key}': list must not be empty"
        )));
    }
    for (i, v) in values.iter().enumerate() {
        if values[..i].contains(v) {
            return Err(CliError::Config(format!(
                "config key '{key}': duplicate entry '{v}'"
            )));
        }
    }
    Ok(())
}

/// Parses `learned` / `fixed(VALUE)`; `None` means learned.
fn parse_mode(raw: &str, key: &str) -> Result<Option<f64>> {
    if raw == "learned" {
        return Ok(None);
    }
    raw.strip_prefix("fixed(")
        .and_then(|rest| rest.strip_suffix(')'))
        .and_then(|v| v.parse::<f64>().ok())
        .filter(|v| v.is_finite())
        .map(Some)
        .ok_or_else(|| {
            CliError::Config(format!(
                "config key '{key}': expected 'learned' or 'fixed(VALUE)', got '{raw}'"
            ))
        })
}

fn parse_value(key: &str, kind: Kind, raw: &str) -> Result<Value> {
    let bad =
        |want: &str| CliError::Config(format!("config key '{key}': expected {want}, got '{raw}'"));
    let uint = |s: &str| s.trim().parse::<u64>().map_err(|_| bad("an unsigned integer"));
    let float = |s: &str| {
        s.trim()
            .parse::<f64>()
            .ok()
            .filter(|v| v.is_finite())
            .ok_or_else(|| bad("a finite number"))
    };
    fn items(s: &str) -> Vec<&str> {
        if s.trim().is_empty() {
            Vec::new()
        } else {
            s.split(',').collect()
        }
    }
    Ok(match kind {
        Kind::UInt => Value::UInt(uint(raw)?),
        Kind::Float => Value::Float(float(raw)?),
        Kind::Bool => match raw {
            "true" => Value::Bool(true),
            "false" => Value::Bool(false),
            _ => return Err(bad("true or false")),
        },
        Kind::Str => Value::Str(raw.to_string()),
        Kind::UIntList => Value::UIntList(
            items(raw)
                .into_iter()
                .map(uint)
                .collect::<Result<Vec<_>>>()?,
        ),
        Kind::FloatList => Value::FloatList(
            items(raw)
                .into_iter()
                .map(float)
                .collect::<Result<Vec<_>>>()?,
        ),
        Kind::StrList => Value::StrList(
            items(raw)
                .into_iter()
                .map(|s| s.trim().to_string())
                .collect(),
        ),
    })
}

fn render(value: &Value) -> String {
    fn join<T: std::fmt::Display>(items: &[T]) -> String {
        items
            .iter()
            .map(|v| v.to_string())
            .collect::<Vec<_>>()
            .join(",")
    }
    match value {
        Value::UInt(v) => v.to_string(),
        Value::Float(v) => v.to_string(),
        Value::Bool(v) => v.to_string(),
        Value::Str(v) => v.clone(),
        Value::UIntList(v) => join(v),
        Value::FloatList(v) => join(v),
        Value::StrList(v) => join(v),
    }
}

/// Writes the resolved snapshot for one command into `path`.
pub fn write_snapshot(cfg: &Config, command: &str, path: &Path) -> Result<()> {
    std::fs::write(path, cfg.snapshot(command)).map_err(|e| CliError::io(path, e))
}
