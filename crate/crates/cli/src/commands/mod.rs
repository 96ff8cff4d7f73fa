//! One module per subcommand, plus the shared invocation context and
//! clobber guard.

use std::path::{Path, PathBuf};

use crate::config::Config;
use crate::error::{CliError, Result};

pub mod attack;
pub mod demo1d;
pub mod gradcheck;
pub mod saliency;
pub mod train;

/// Everything a command needs beyond its config: where to write, whether
/// clobbering is allowed, and the worker budget.
pub struct Invocation {
    pub config: Config,
    pub out: PathBuf,
    pub force: bool,
    pub jobs: usize,
}

/// Refuses to proceed when any target path already exists, unless
/// `--force` was given.
pub fn refuse_clobber(force: bool, targets: &[PathBuf]) -> Result<()> {
    if force {
        return Ok(());
    }
    for path in targets {
        if path.exists() {
            return Err(CliError::Config(format!(
                "refusing to overwrite existing {} (pass --force to replace it)",
                path.display()
            )));
        }
    }
    Ok(())
}

pub fn create_out_dir(out: &Path) -> Result<()> {
    std::fs::create_dir_all(out).map_err(|e| CliError::io(out, e))
}
