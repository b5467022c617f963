//! Run manifests: enough to reproduce every output byte-for-byte.

use std::collections::BTreeMap;
use std::path::Path;

use serde::Serialize;

use crate::config::{sha256_hex, ExperimentConfig};
use crate::CliError;

#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct FileEntry {
    pub role: String,
    pub path: String,
    pub sha256: String,
}

#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct Manifest {
    pub schema: String,
    pub command: String,
    pub master_seed: u64,
    pub config_hash: String,
    pub config: Vec<String>,
    pub inputs: Vec<FileEntry>,
    pub outputs: Vec<FileEntry>,
    /// Command-specific seeds and settings, keyed by name.
    pub details: BTreeMap<String, String>,
}

impl Manifest {
    pub fn new(command: &str, config: &ExperimentConfig) -> Self {
        Self {
            schema: "v1".into(),
            command: command.into(),
            master_seed: config.gp.seed,
            config_hash: config.hash(),
            config: config.canonical().lines().map(String::from).collect(),
            inputs: Vec::new(),
            outputs: Vec::new(),
            details: BTreeMap::new(),
        }
    }

    pub fn input(&mut self, role: &str, path: &Path) -> Result<(), CliError> {
        let bytes = std::fs::read(path).map_err(|e| CliError::io(path, e))?;
        self.inputs.push(FileEntry { role: role.into(), path: path.display().to_string(), sha256: sha256_hex(&bytes) });
        Ok(())
    }

    /// Record an output by its file name within the output directory.
    pub fn output(&mut self, role: &str, path: &Path) -> Result<(), CliError> {
        let bytes = std::fs::read(path).map_err(|e| CliError::io(path, e))?;
        let name = path.file_name().map_or_else(|| path.display().to_string(), |n| n.to_string_lossy().into_owned());
        self.outputs.push(FileEntry { role: role.into(), path: name, sha256: sha256_hex(&bytes) });
        Ok(())
    }

    pub fn detail(&mut self, key: &str, value: impl ToString) {
        self.details.insert(key.into(), value.to_string());
    }

    pub fn write(&self, path: &Path) -> Result<(), CliError> {
        let mut text = serde_json::to_string_pretty(self).map_err(|e| CliError::Io(e.to_string()))?;
        text.push('\n');
        std::fs::write(path, text).map_err(|e| CliError::io(path, e))
    }
}
