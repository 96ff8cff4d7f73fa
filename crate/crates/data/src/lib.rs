//! Data pipeline: binary record ingestion for 32x32 RGB image datasets,
//! deterministic augmentation and subsetting, and self-contained synthetic
//! sources (procedural images in the same record format, plus 1-D demo
//! signals for the feature-detection illustration).

pub mod augment;
pub mod cifar;
pub mod dataset;
pub mod error;
pub mod subset;
pub mod synth1d;
pub mod synthetic;

pub use augment::{augment_batch, crop_padded, flip_horizontal, AugmentationConfig};
pub use cifar::{
    cifar_dir_is_complete, load_cifar10, quantize_pixel, write_record_file, RECORD_BYTES,
    TEST_FILE, TRAIN_FILES,
};
pub use dataset::{
    Dataset, Standardizer, SubsetInfo, IMAGE_CHANNELS, IMAGE_PIXELS, IMAGE_SIDE, NUM_CLASSES,
};
pub use error::{DataError, Result};
pub use subset::subset;
pub use synth1d::{synth_1d_signal, Signal1d, SignalKind, SIGNAL_LEN, TEMPLATE_1D, TEMPLATE_LEN};
pub use synthetic::{generate_synthetic, render_image, write_synthetic_cifar_dir, CLASS_NAMES};
