//! The `scslab` executable: a flat-config experiment driver over the
//! layer library. Subcommands cover the full pipeline — grid training,
//! PGD robustness sweeps, saliency rendering, the gradient audit and
//! the 1-D detector demo.
//!
//! Exit codes: 0 ok, 2 config error, 3 data error, 4 checkpoint error,
//! 5 numeric failure.

use std::ffi::OsString;

use clap::error::ErrorKind;
use clap::Parser;

pub mod args;
pub mod commands;
pub mod config;
pub mod datasrc;
pub mod error;

pub use args::{Cli, Command};
pub use commands::Invocation;
pub use config::Config;
pub use error::{CliError, Result};

/// Parses `argv`, runs the selected command, and returns the process
/// exit code. Errors print to stderr.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 2,
            };
            let _ = e.print();
            return code;
        }
    };
    match execute(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

/// Resolves the configuration (defaults → file → flag shorthands →
/// `--override`s), validates it, and dispatches to the subcommand.
pub fn execute(cli: Cli) -> Result<()> {
    if cli.jobs == 0 {
        return Err(CliError::Config("--jobs must be at least 1".into()));
    }
    let mut cfg = Config::default();
    if let Some(path) = &cli.config {
        cfg.apply_file(path)?;
    }
    if let Some(dir) = &cli.data_dir {
        cfg.set("data.dir", &dir.display().to_string())?;
    }
    match &cli.command {
        Command::Attack {
            checkpoint: Some(p),
        } => cfg.set("attack.checkpoint", &p.display().to_string())?,
        Command::Saliency {
            checkpoint: Some(p),
        } => cfg.set("saliency.checkpoint", &p.display().to_string())?,
        _ => {}
    }
    if let Some(seed) = cli.seed {
        let key = match &cli.command {
            Command::Train { .. } => "grid.seeds",
            Command::Attack { .. } => "attack.seed",
            Command::Gradcheck => "gradcheck.seed",
            Command::Demo1d => "demo1d.seed",
            Command::Saliency { .. } => {
                return Err(CliError::Config(
                    "--seed has no effect on saliency; set saliency.indices instead".into(),
                ))
            }
        };
        cfg.set(key, &seed.to_string())?;
    }
    for entry in &cli.overrides {
        let (key, value) = entry.split_once('=').ok_or_else(|| {
            CliError::Config(format!("override '{entry}': expected KEY=VALUE"))
        })?;
        cfg.set(key.trim(), value.trim())?;
    }
    cfg.validate()?;

    let inv = Invocation {
        config: cfg,
        out: cli.out.clone(),
        force: cli.force,
        jobs: cli.jobs,
    };
    match cli.command {
        Command::Train { cell } => commands::train::cmd_train(&inv, cell),
        Command::Attack { .. } => commands::attack::cmd_attack(&inv),
        Command::Saliency { .. } => commands::saliency::cmd_saliency(&inv),
        Command::Gradcheck => commands::gradcheck::cmd_gradcheck(&inv),
        Command::Demo1d => commands::demo1d::cmd_demo1d(&inv),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(args: &[&str]) -> Cli {
        Cli::try_parse_from(args).unwrap()
    }

    #[test]
    fn seed_shorthand_targets_the_command_seed_key() {
        let cli = parse(&["scslab", "gradcheck", "--seed", "9"]);
        assert!(matches!(cli.command, Command::Gradcheck));
        assert_eq!(cli.seed, Some(9));
    }

    #[test]
    fn malformed_override_is_a_config_error() {
        let cli = parse(&["scslab", "demo1d", "--override", "nonsense"]);
        let err = execute(cli).unwrap_err();
        assert_eq!(err.exit_code(), 2);
        assert!(err.to_string().contains("nonsense"));
    }

    #[test]
    fn unknown_override_key_is_a_config_error() {
        let cli = parse(&["scslab", "demo1d", "--override", "demo.sigma=1"]);
        let err = execute(cli).unwrap_err();
        assert_eq!(err.exit_code(), 2);
        assert!(err.to_string().contains("demo.sigma"));
    }

    #[test]
    fn zero_jobs_is_rejected() {
        let cli = parse(&["scslab", "demo1d", "--jobs", "0"]);
        assert_eq!(execute(cli).unwrap_err().exit_code(), 2);
    }

    #[test]
    fn seed_on_saliency_is_rejected() {
        let cli = parse(&["scslab", "saliency", "--seed", "1"]);
        assert_eq!(execute(cli).unwrap_err().exit_code(), 2);
    }

    #[test]
    fn help_and_version_exit_zero() {
        assert_eq!(run(["scslab", "--help"]), 0);
        assert_eq!(run(["scslab", "--version"]), 0);
        assert_eq!(run(["scslab", "trian"]), 2);
    }
}
