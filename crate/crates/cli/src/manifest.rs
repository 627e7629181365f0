use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::args::{Command, Global};
use crate::error::{CliError, CliResult};

pub const MANIFEST_FILE: &str = "manifest.json";

/// Resolved invocation; `diffuser --replay manifest.json` runs it again.
#[derive(Debug, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub subcommand: String,
    pub global: Global,
    pub command: Command,
}

impl Manifest {
    pub fn new(global: &Global, command: &Command) -> Self {
        Manifest {
            tool: env!("CARGO_PKG_NAME").to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            subcommand: command.name().to_string(),
            global: global.clone(),
            command: command.clone(),
        }
    }

    pub fn read(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| {
            CliError::Core(diffuser::Error::Io {
                path: path.to_path_buf(),
                source: e,
            })
        })?;
        Ok(serde_json::from_str(&text)?)
    }

    pub fn write(&self, out_dir: &Path) -> CliResult<PathBuf> {
        let path = out_dir.join(MANIFEST_FILE);
        diffuser::io::write_json(self, &path)?;
        Ok(path)
    }
}
