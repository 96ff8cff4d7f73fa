//! Dataset resolution: a real CIFAR-10 directory when available, the
//! deterministic synthetic generator otherwise.

use scslab_data::{cifar_dir_is_complete, generate_synthetic, load_cifar10, subset, Dataset};

use crate::config::Config;
use crate::error::{CliError, Result};

/// Train/test pair plus where it came from.
#[derive(Debug)]
pub struct LoadedData {
    pub train: Dataset,
    pub test: Dataset,
    pub source: &'static str,
}

/// Loads the dataset the config asks for. `data.source = auto` picks
/// CIFAR-10 when `data.dir` holds a complete binary set and falls back
/// to the synthetic generator otherwise.
pub fn load_data(cfg: &Config) -> Result<LoadedData> {
    let dir = cfg.text("data.dir");
    let train_n = cfg.count("data.train_count");
    let test_n = cfg.count("data.test_count");
    let use_cifar = match cfg.text("data.source").as_str() {
        "cifar10" => {
            if dir.is_empty() {
                return Err(CliError::Data(
                    "data.source = cifar10 but no data directory given; pass --data-dir".into(),
                ));
            }
            true
        }
        "synthetic" => false,
        _ => !dir.is_empty() && cifar_dir_is_complete(&dir),
    };
    if use_cifar {
        let (full_train, full_test) =
            load_cifar10(&dir).map_err(|e| CliError::Data(e.to_string()))?;
        let stratified = cfg.flag("data.stratified");
        let seed = cfg.uint("data.subset_seed");
        Ok(LoadedData {
            train: maybe_subset(&full_train, train_n, stratified, seed)?,
            test: maybe_subset(&full_test, test_n, stratified, seed)?,
            source: "cifar10",
        })
    } else {
        if train_n == 0 || test_n == 0 {
            return Err(CliError::Config(
                "synthetic data needs explicit data.train_count and data.test_count \
                 (0 means 'all' only for cifar10)"
                    .into(),
            ));
        }
        let seed = cfg.uint("data.synthetic_seed");
        let train = generate_synthetic(train_n, seed, 0, "train")
            .map_err(|e| CliError::Data(e.to_string()))?;
        // test images draw from rng streams past the training range
        let test = generate_synthetic(test_n, seed, train_n as u64, "test")
            .map_err(|e| CliError::Data(e.to_string()))?;
        Ok(LoadedData {
            train,
            test,
            source: "synthetic",
        })
    }
}

/// Count 0 means the full split.
fn maybe_subset(ds: &Dataset, n: usize, stratified: bool, seed: u64) -> Result<Dataset> {
    if n == 0 || n >= ds.len() {
        return Ok(ds.clone());
    }
    subset(ds, n, stratified, seed).map_err(|e| CliError::Data(e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_cfg() -> Config {
        let mut cfg = Config::default();
        cfg.set("data.train_count", "20").unwrap();
        cfg.set("data.test_count", "10").unwrap();
        cfg
    }

    #[test]
    fn auto_without_a_directory_falls_back_to_synthetic() {
        let data = load_data(&small_cfg()).unwrap();
        assert_eq!(data.source, "synthetic");
        assert_eq!(data.train.len(), 20);
        assert_eq!(data.test.len(), 10);
    }

    #[test]
    fn synthetic_splits_are_disjoint_streams() {
        let data = load_data(&small_cfg()).unwrap();
        assert_ne!(data.train.raw_image(0), data.test.raw_image(0));
    }

    #[test]
    fn explicit_cifar_without_a_directory_is_a_data_error() {
        let mut cfg = small_cfg();
        cfg.set("data.source", "cifar10").unwrap();
        let err = load_data(&cfg).unwrap_err();
        assert_eq!(err.exit_code(), 3);
    }

    #[test]
    fn synthetic_with_zero_counts_is_rejected() {
        let mut cfg = small_cfg();
        cfg.set("data.source", "synthetic").unwrap();
        cfg.set("data.train_count", "0").unwrap();
        assert_eq!(load_data(&cfg).unwrap_err().exit_code(), 2);
    }
}
