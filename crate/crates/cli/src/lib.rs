//! Experiment driver behind the `emd` binary: synthetic map generation,
//! multi-run rule evolution with checkpoints, importance analysis of the
//! resulting FactorScores table, robustness comparison of hand-picked
//! rules and single-simulation inspection.
//!
//! Every command writes schema-versioned CSV files plus a JSON manifest
//! naming the seeds, config hash and input/output digests. Outputs never
//! depend on the worker count.

pub mod analyze;
pub mod commands;
pub mod config;
pub mod manifest;
pub mod records;

use std::path::Path;

use emd_core::{MapError, RuleError};
use emd_forest::ForestError;
use emd_gp::GpError;
use emd_stats::StatsError;
use thiserror::Error;

pub use config::ExperimentConfig;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CliError {
    #[error("config line {line}: {msg}")]
    Config { line: usize, msg: String },
    #[error("referenced file does not exist: {0}")]
    Missing(String),
    #[error("{0}")]
    Io(String),
    #[error("csv line {line}: {msg}")]
    Csv { line: u64, msg: String },
    #[error(transparent)]
    Map(#[from] MapError),
    #[error(transparent)]
    Rule(#[from] RuleError),
    #[error(transparent)]
    Gp(#[from] GpError),
    #[error(transparent)]
    Forest(#[from] ForestError),
    #[error(transparent)]
    Stats(#[from] StatsError),
    #[error("{what}: need at least {needed}, found {found}")]
    Insufficient { what: String, needed: usize, found: usize },
    #[error("{0}")]
    Usage(String),
}

impl CliError {
    pub fn io(path: &Path, e: std::io::Error) -> Self {
        CliError::Io(format!("{}: {e}", path.display()))
    }
}

/// Worker count: explicit value, else the config, else all cores.
pub fn resolve_workers(flag: Option<usize>, config: &ExperimentConfig) -> usize {
    flag.or(config.workers)
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
        .max(1)
}

/// Run `f` on a dedicated pool of `workers` threads.
pub fn with_workers<T: Send>(workers: usize, f: impl FnOnce() -> T + Send) -> Result<T, CliError> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| CliError::Io(format!("thread pool: {e}")))?;
    Ok(pool.install(f))
}
