//! Library half of the `geomix` command-line tool.
//!
//! [`Cli`] is the argument grammar, [`config::RunConfig`] the layered
//! key-value configuration and [`run`] the dispatcher. Keeping them in a
//! library lets the integration tests and fuzz targets drive the same code
//! as the binary.

pub mod commands;
pub mod config;

use std::path::PathBuf;

use clap::{Parser, Subcommand};

use crate::config::RunConfig;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    /// Bad flags or configuration values; exit code 2.
    #[error("configuration error: {0}")]
    Config(String),
    /// Failure while running; exit code 1.
    #[error("{0}")]
    Runtime(#[from] geomix::Error),
    /// A verification or gradient check did not pass; exit code 1.
    #[error("check failed: {0}")]
    CheckFailed(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Runtime(_) | CliError::CheckFailed(_) => 1,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "geomix", version, about = "Geometry-aware graph mixup: training, augmentation and checks")]
#[command(after_help = config::key_table())]
pub struct Cli {
    /// Config file of key=value lines.
    #[arg(short, long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,

    /// Override one key; repeatable, applied after the config file.
    #[arg(short = 's', long = "set", global = true, value_name = "KEY=VALUE")]
    pub set: Vec<String>,

    /// Shortcut for `data.dir`.
    #[arg(long, global = true, value_name = "DIR")]
    pub data: Option<PathBuf>,

    /// Shortcut for `run.out`.
    #[arg(long, global = true, value_name = "DIR")]
    pub out: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Train one model per seed and write metrics and a summary.
    Train,
    /// Run mixup once and write the mixed features and soft labels.
    Augment,
    /// Monte Carlo checks of the mixup expectations and tail bounds, and the
    /// residual-step/descent-step equivalence.
    Verify,
    /// Finite-difference checks of the analytic gradients.
    Gradcheck,
    /// Build a k-nearest-neighbor edge list from features.csv.
    Knn,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Train => "train",
            Command::Augment => "augment",
            Command::Verify => "verify",
            Command::Gradcheck => "gradcheck",
            Command::Knn => "knn",
        }
    }
}

impl Cli {
    /// Defaults, then the config file, then the path shortcuts, then `--set`.
    pub fn run_config(&self) -> Result<RunConfig, CliError> {
        let mut cfg = RunConfig::new();
        if let Some(path) = &self.config {
            let text = std::fs::read_to_string(path)
                .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
            cfg.apply_text(&text, &path.display().to_string())?;
        }
        if let Some(d) = &self.data {
            cfg.set("data.dir", &d.display().to_string())?;
        }
        if let Some(o) = &self.out {
            cfg.set("run.out", &o.display().to_string())?;
        }
        for pair in &self.set {
            cfg.set_pair(pair)?;
        }
        Ok(cfg)
    }
}

/// Caps the rayon pool at `GEOMIX_THREADS` when set.
pub fn init_threads() -> Result<(), CliError> {
    if let Ok(raw) = std::env::var("GEOMIX_THREADS") {
        let n: usize = raw
            .parse()
            .ok()
            .filter(|&n| n > 0)
            .ok_or_else(|| CliError::Config(format!("GEOMIX_THREADS={raw:?} is not a positive integer")))?;
        // a pool may already exist when called twice in one process
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    Ok(())
}

pub fn run(cli: &Cli) -> Result<(), CliError> {
    init_threads()?;
    let cfg = cli.run_config()?;
    commands::dispatch(cli.command, &cfg)
}
