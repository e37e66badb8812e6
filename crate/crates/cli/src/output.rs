use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::config::{RunConfig, SCHEMA_VERSION};
use crate::CliError;

/// Common header of every JSON report.
#[derive(Serialize)]
pub struct Envelope<'a, T: Serialize> {
    pub schema_version: u32,
    pub command: &'a str,
    pub config: &'a RunConfig,
    #[serde(flatten)]
    pub body: T,
}

pub fn ensure_dir(dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(|e| CliError::Failure(format!("cannot create {}: {e}", dir.display())))
}

pub fn write_report<T: Serialize>(
    dir: &Path,
    name: &str,
    command: &str,
    config: &RunConfig,
    body: T,
) -> Result<PathBuf, CliError> {
    let env = Envelope {
        schema_version: SCHEMA_VERSION,
        command,
        config,
        body,
    };
    let mut text = serde_json::to_string_pretty(&env).map_err(|e| CliError::Failure(e.to_string()))?;
    text.push('\n');
    let path = dir.join(name);
    fs::write(&path, text)?;
    Ok(path)
}

pub fn write_csv<T: Serialize>(dir: &Path, name: &str, rows: &[T]) -> Result<PathBuf, CliError> {
    let path = dir.join(name);
    let mut w = csv::Writer::from_path(&path).map_err(|e| CliError::Failure(e.to_string()))?;
    for r in rows {
        w.serialize(r).map_err(|e| CliError::Failure(e.to_string()))?;
    }
    w.flush()?;
    Ok(path)
}
