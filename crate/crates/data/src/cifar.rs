//! Binary-record ingestion and serialization.
//!
//! Record layout: 1 label byte followed by 3072 pixel bytes (channel-major
//! R, G, B; row-major within each channel). A file is a plain
//! concatenation of records. The standard archive ships five training
//! files and one test file.

use std::fs;
use std::path::{Path, PathBuf};

use crate::dataset::{Dataset, IMAGE_PIXELS, NUM_CLASSES};
use crate::error::{DataError, Result};

pub const RECORD_BYTES: usize = 1 + IMAGE_PIXELS;
pub const TRAIN_FILES: [&str; 5] = [
    "data_batch_1.bin",
    "data_batch_2.bin",
    "data_batch_3.bin",
    "data_batch_4.bin",
    "data_batch_5.bin",
];
pub const TEST_FILE: &str = "test_batch.bin";

/// Parses one record file, appending into the label/pixel accumulators.
fn read_batch_file(path: &Path, labels: &mut Vec<u8>, pixels: &mut Vec<u8>) -> Result<()> {
    let bytes = fs::read(path).map_err(|e| DataError::io(path, e))?;
    if bytes.len() % RECORD_BYTES != 0 {
        let tail_start = (bytes.len() / RECORD_BYTES) * RECORD_BYTES;
        return Err(DataError::format(
            path,
            tail_start as u64,
            format!(
                "file length {} is not a multiple of the {RECORD_BYTES}-byte record \
                 (trailing fragment of {} bytes)",
                bytes.len(),
                bytes.len() - tail_start
            ),
        ));
    }
    for (r, record) in bytes.chunks_exact(RECORD_BYTES).enumerate() {
        let label = record[0];
        if label as usize >= NUM_CLASSES {
            return Err(DataError::format(
                path,
                (r * RECORD_BYTES) as u64,
                format!("label byte {label} exceeds maximum class {}", NUM_CLASSES - 1),
            ));
        }
        labels.push(label);
        pixels.extend_from_slice(&record[1..]);
    }
    Ok(())
}

/// Loads a train/test dataset pair from a directory holding the binary
/// record files.
pub fn load_cifar10(dir: impl AsRef<Path>) -> Result<(Dataset, Dataset)> {
    let dir = dir.as_ref();
    let mut train_labels = Vec::new();
    let mut train_pixels = Vec::new();
    for name in TRAIN_FILES {
        read_batch_file(&dir.join(name), &mut train_labels, &mut train_pixels)?;
    }
    let mut test_labels = Vec::new();
    let mut test_pixels = Vec::new();
    read_batch_file(&dir.join(TEST_FILE), &mut test_labels, &mut test_pixels)?;
    let train = Dataset::new(train_pixels, train_labels, "train")?;
    let test = Dataset::new(test_pixels, test_labels, "test")?;
    Ok((train, test))
}

/// True if `dir` contains all six record files.
pub fn cifar_dir_is_complete(dir: impl AsRef<Path>) -> bool {
    let dir = dir.as_ref();
    TRAIN_FILES
        .iter()
        .chain(std::iter::once(&TEST_FILE))
        .all(|name| dir.join(name).is_file())
}

/// Serializes a dataset to one record file. Inverse of loading: bytes are
/// written exactly as stored, so load -> write round-trips bit-for-bit.
pub fn write_record_file(ds: &Dataset, path: impl AsRef<Path>) -> Result<()> {
    let path: PathBuf = path.as_ref().into();
    let mut bytes = Vec::with_capacity(ds.len() * RECORD_BYTES);
    for i in 0..ds.len() {
        bytes.push(ds.label(i) as u8);
        bytes.extend_from_slice(ds.raw_image(i));
    }
    fs::write(&path, bytes).map_err(|e| DataError::io(path, e))
}

/// Quantizes a `[0,1]` value to the byte the loader would scale back to it.
pub fn quantize_pixel(v: f64) -> u8 {
    (v.clamp(0.0, 1.0) * 255.0).round() as u8
}
