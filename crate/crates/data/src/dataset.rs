//! In-memory image dataset in the 32x32 RGB record layout.
//!
//! Pixels are stored as the raw bytes of the record format and scaled to
//! `[0, 1]` at access time, which keeps serialization bit-exact and memory
//! at one byte per pixel.

use crate::error::{DataError, Result};

pub const IMAGE_SIDE: usize = 32;
pub const IMAGE_CHANNELS: usize = 3;
/// Pixels per image: 3 channels x 32 x 32, channel-major.
pub const IMAGE_PIXELS: usize = IMAGE_CHANNELS * IMAGE_SIDE * IMAGE_SIDE;
pub const NUM_CLASSES: usize = 10;

/// How a dataset was cut down, if it was.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SubsetInfo {
    pub count: usize,
    pub stratified: bool,
    pub seed: u64,
}

/// A labeled image collection plus provenance.
#[derive(Debug, Clone)]
pub struct Dataset {
    pixels: Vec<u8>,
    labels: Vec<u8>,
    split: String,
    subset: Option<SubsetInfo>,
    checksum: u64,
}

impl Dataset {
    /// Wraps raw record content. `pixels` holds `labels.len()` images of
    /// [`IMAGE_PIXELS`] bytes each, channel-major.
    pub fn new(pixels: Vec<u8>, labels: Vec<u8>, split: impl Into<String>) -> Result<Dataset> {
        if pixels.len() != labels.len() * IMAGE_PIXELS {
            return Err(DataError::Config(format!(
                "pixel buffer holds {} bytes; {} labels need {}",
                pixels.len(),
                labels.len(),
                labels.len() * IMAGE_PIXELS
            )));
        }
        if let Some(pos) = labels.iter().position(|&l| l as usize >= NUM_CLASSES) {
            return Err(DataError::Config(format!(
                "label {} at record {pos} out of range 0..{NUM_CLASSES}",
                labels[pos]
            )));
        }
        let checksum = content_checksum(&labels, &pixels);
        Ok(Dataset {
            pixels,
            labels,
            split: split.into(),
            subset: None,
            checksum,
        })
    }

    pub(crate) fn with_subset_info(mut self, info: SubsetInfo) -> Dataset {
        self.subset = Some(info);
        self
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn split(&self) -> &str {
        &self.split
    }

    pub fn subset_info(&self) -> Option<SubsetInfo> {
        self.subset
    }

    /// FNV-1a over every record (label byte then pixel bytes) in order.
    pub fn checksum(&self) -> u64 {
        self.checksum
    }

    pub fn label(&self, i: usize) -> usize {
        self.labels[i] as usize
    }

    pub fn labels(&self) -> &[u8] {
        &self.labels
    }

    /// Raw channel-major pixel bytes of image `i`.
    pub fn raw_image(&self, i: usize) -> &[u8] {
        &self.pixels[i * IMAGE_PIXELS..(i + 1) * IMAGE_PIXELS]
    }

    /// Image `i` scaled into `[0, 1]`.
    pub fn image(&self, i: usize) -> Vec<f64> {
        self.raw_image(i).iter().map(|&b| b as f64 / 255.0).collect()
    }

    /// Writes image `i`, scaled into `[0, 1]`, into `out`.
    pub fn write_image_into(&self, i: usize, out: &mut [f64]) {
        for (o, &b) in out.iter_mut().zip(self.raw_image(i)) {
            *o = b as f64 / 255.0;
        }
    }

    /// Number of examples carrying each label.
    pub fn per_class_counts(&self) -> [usize; NUM_CLASSES] {
        let mut counts = [0usize; NUM_CLASSES];
        for &l in &self.labels {
            counts[l as usize] += 1;
        }
        counts
    }

    /// New dataset holding the given records, in the given order.
    pub fn gather(&self, indices: &[usize], split: impl Into<String>) -> Result<Dataset> {
        let mut pixels = Vec::with_capacity(indices.len() * IMAGE_PIXELS);
        let mut labels = Vec::with_capacity(indices.len());
        for &i in indices {
            if i >= self.len() {
                return Err(DataError::Config(format!(
                    "index {i} out of range for dataset of {}",
                    self.len()
                )));
            }
            pixels.extend_from_slice(self.raw_image(i));
            labels.push(self.labels[i]);
        }
        Dataset::new(pixels, labels, split)
    }
}

pub(crate) fn content_checksum(labels: &[u8], pixels: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf29ce484222325;
    let mut eat = |b: u8| {
        h ^= b as u64;
        h = h.wrapping_mul(0x100000001b3);
    };
    for (i, &l) in labels.iter().enumerate() {
        eat(l);
        for &p in &pixels[i * IMAGE_PIXELS..(i + 1) * IMAGE_PIXELS] {
            eat(p);
        }
    }
    h
}

/// Per-channel affine transform fitted on a training set, for the optional
/// standardized-input mode.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Standardizer {
    pub mean: [f64; IMAGE_CHANNELS],
    pub std: [f64; IMAGE_CHANNELS],
}

impl Standardizer {
    /// Channel means and standard deviations of a dataset in `[0,1]` units.
    pub fn fit(ds: &Dataset) -> Standardizer {
        let plane = IMAGE_SIDE * IMAGE_SIDE;
        let mut sum = [0.0f64; IMAGE_CHANNELS];
        let mut sumsq = [0.0f64; IMAGE_CHANNELS];
        for i in 0..ds.len() {
            let raw = ds.raw_image(i);
            for c in 0..IMAGE_CHANNELS {
                for &b in &raw[c * plane..(c + 1) * plane] {
                    let v = b as f64 / 255.0;
                    sum[c] += v;
                    sumsq[c] += v * v;
                }
            }
        }
        let n = (ds.len() * plane) as f64;
        let mut mean = [0.0; IMAGE_CHANNELS];
        let mut std = [1.0; IMAGE_CHANNELS];
        for c in 0..IMAGE_CHANNELS {
            mean[c] = sum[c] / n;
            let var = (sumsq[c] / n - mean[c] * mean[c]).max(0.0);
            std[c] = var.sqrt().max(1e-8);
        }
        Standardizer { mean, std }
    }

    /// Standardizes one channel-major image buffer in place.
    pub fn apply(&self, image: &mut [f64]) {
        let plane = IMAGE_SIDE * IMAGE_SIDE;
        for c in 0..IMAGE_CHANNELS {
            for v in &mut image[c * plane..(c + 1) * plane] {
                *v = (*v - self.mean[c]) / self.std[c];
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny() -> Dataset {
        let mut pixels = vec![0u8; 2 * IMAGE_PIXELS];
        pixels[0] = 255;
        pixels[IMAGE_PIXELS] = 51;
        Dataset::new(pixels, vec![3, 7], "train").unwrap()
    }

    #[test]
    fn scaling_and_counts() {
        let ds = tiny();
        assert_eq!(ds.len(), 2);
        assert_eq!(ds.image(0)[0], 1.0);
        assert_eq!(ds.image(1)[0], 0.2);
        let counts = ds.per_class_counts();
        assert_eq!(counts[3], 1);
        assert_eq!(counts[7], 1);
        assert_eq!(counts.iter().sum::<usize>(), 2);
    }

    #[test]
    fn label_range_is_enforced() {
        let err = Dataset::new(vec![0; IMAGE_PIXELS], vec![10], "train").unwrap_err();
        assert!(err.to_string().contains("label 10"));
    }

    #[test]
    fn gather_reorders_and_checksums_differ() {
        let ds = tiny();
        let flipped = ds.gather(&[1, 0], "train").unwrap();
        assert_eq!(flipped.label(0), 7);
        assert_ne!(ds.checksum(), flipped.checksum());
        let same = ds.gather(&[0, 1], "train").unwrap();
        assert_eq!(ds.checksum(), same.checksum());
    }

    #[test]
    fn standardizer_zeroes_means() {
        let mut pixels = vec![0u8; IMAGE_PIXELS];
        for (i, p) in pixels.iter_mut().enumerate() {
            *p = (i % 256) as u8;
        }
        let ds = Dataset::new(pixels, vec![0], "train").unwrap();
        let st = Standardizer::fit(&ds);
        let mut img = ds.image(0);
        st.apply(&mut img);
        let plane = IMAGE_SIDE * IMAGE_SIDE;
        for c in 0..IMAGE_CHANNELS {
            let m: f64 = img[c * plane..(c + 1) * plane].iter().sum::<f64>() / plane as f64;
            assert!(m.abs() < 1e-9, "channel {c} mean {m}");
        }
    }
}
