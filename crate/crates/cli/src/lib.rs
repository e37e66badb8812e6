//! Command-line harness: mesh generation, coefficient audits, operator
//! cross-validation, Green-identity checks, M12 solves and convergence
//! sweeps, each writing JSON reports and CSV tables.

pub mod commands;
pub mod config;
pub mod output;
pub mod table;

use std::fmt;
use std::path::PathBuf;

use bdie_core::BdieError;

pub use commands::Command;
pub use config::RunConfig;

/// Exit statuses of the `bdie` binary.
pub mod exit {
    pub const OK: i32 = 0;
    pub const GATE_FAILURE: i32 = 1;
    pub const CONFIG: i32 = 2;
    pub const RESOURCE: i32 = 3;
}

#[derive(Debug)]
pub enum CliError {
    Config(String),
    Resource(String),
    Failure(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Config(_) => exit::CONFIG,
            Self::Resource(_) => exit::RESOURCE,
            Self::Failure(_) => exit::GATE_FAILURE,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Config(m) => write!(f, "configuration error: {m}"),
            Self::Resource(m) => write!(f, "resource cap: {m}"),
            Self::Failure(m) => write!(f, "{m}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<BdieError> for CliError {
    fn from(e: BdieError) -> Self {
        match e {
            BdieError::Resource(_) => Self::Resource(e.to_string()),
            BdieError::Parse(_) | BdieError::Partition(_) => Self::Config(e.to_string()),
            other => Self::Failure(other.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        Self::Failure(format!("i/o error: {e}"))
    }
}

/// Result of a command: whether its gates were met and the files written.
#[derive(Debug)]
pub struct Outcome {
    pub passed: bool,
    pub files: Vec<PathBuf>,
    /// Human-readable summary lines.
    pub summary: Vec<String>,
}

impl Outcome {
    pub fn exit_code(&self) -> i32 {
        if self.passed {
            exit::OK
        } else {
            exit::GATE_FAILURE
        }
    }
}

/// Runs `command` on a pool of `config.workers` threads.
pub fn run(command: Command, config: &RunConfig) -> Result<Outcome, CliError> {
    config.validate()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.workers)
        .build()
        .map_err(|e| CliError::Failure(format!("cannot start worker pool: {e}")))?;
    pool.install(|| commands::dispatch(command, config))
}
