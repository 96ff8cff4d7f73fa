//! Training engine: Adam, a one-cycle learning-rate schedule, the
//! epoch loop with shuffling/augmentation/evaluation, per-epoch
//! telemetry CSVs, and self-contained binary checkpoints.

mod checkpoint;
mod error;
mod optim;
mod run;
mod schedule;
mod telemetry;

pub use checkpoint::{load_checkpoint, save_checkpoint, CKPT_MAGIC, CKPT_VERSION};
pub use error::{Result, TrainError};
pub use optim::{Adam, AdamConfig};
pub use run::{
    evaluate, train, TrainOutcome, TrainSettings, BEST_CKPT, FINAL_CKPT, INITIAL_CKPT,
    TELEMETRY_FILE,
};
pub use schedule::OneCycle;
pub use telemetry::{csv_columns, track_norms, EpochRecord, LayerStat, TelemetryWriter};
