//! Model gallery: fixed architecture skeletons whose feature extractor,
//! activation, pooling and normalization are swappable strategies.
//!
//! Three families cover the experiment grid:
//!
//! * `rohrer_small` - three plain stages, ~24K parameters
//! * `rohrer_100k`  - the same skeleton widened to ~106K parameters
//! * `mini_resnet`  - a stem plus six residual blocks, ~172K parameters
//!
//! [`build_model`] resolves strategy names through the layer registries and
//! initializes weights from `(seed, layer ordinal)` only, so every feature
//! kind starts from identical kernels on the same seed.

pub mod block;
pub mod build;
pub mod config;
pub mod descriptor;
pub mod error;
pub mod model;
pub mod ops;

pub use block::ResidualBlock;
pub use build::{build_model, INIT_Q, INPUT_CHANNELS, INPUT_SIDE, NUM_CLASSES};
pub use config::{LayerVariantConfig, ARCH_FAMILIES};
pub use descriptor::{LayerInfo, ModelDescriptor};
pub use error::{Result, ZooError};
pub use model::Model;
pub use ops::pad_channels;
