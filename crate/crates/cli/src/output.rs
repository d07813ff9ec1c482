use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde_json::{json, Map, Value};

use crate::CliError;

/// Collects output files and result values, then writes `manifest.json`.
pub struct Run {
    command: &'static str,
    out: Option<PathBuf>,
    inputs: Map<String, Value>,
    results: Map<String, Value>,
    files: Vec<String>,
    started: Instant,
}

impl Run {
    pub fn new(command: &'static str, out: Option<PathBuf>) -> Result<Self, CliError> {
        if let Some(dir) = &out {
            fs::create_dir_all(dir).map_err(|e| CliError::Config(format!("{}: {e}", dir.display())))?;
        }
        Ok(Self {
            command,
            out,
            inputs: Map::new(),
            results: Map::new(),
            files: Vec::new(),
            started: Instant::now(),
        })
    }

    pub fn input(&mut self, key: &str, v: impl Into<Value>) {
        self.inputs.insert(key.to_string(), v.into());
    }

    pub fn result(&mut self, key: &str, v: impl Into<Value>) {
        self.results.insert(key.to_string(), v.into());
    }

    pub fn dir(&self) -> Option<&Path> {
        self.out.as_deref()
    }

    /// Writes `text` to `name` under the output directory, if any.
    pub fn write(&mut self, name: &str, text: &str) -> Result<(), CliError> {
        let Some(dir) = &self.out else { return Ok(()) };
        let path = dir.join(name);
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent).map_err(|e| CliError::Config(format!("{}: {e}", parent.display())))?;
        }
        fs::write(&path, text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        self.files.push(name.to_string());
        Ok(())
    }

    /// Records files written by library code.
    pub fn wrote(&mut self, name: &str) {
        self.files.push(name.to_string());
    }

    pub fn finish(self) -> Result<(), CliError> {
        let Some(dir) = &self.out else { return Ok(()) };
        let manifest = json!({
            "command": self.command,
            "inputs": self.inputs,
            "results": self.results,
            "outputs": self.files,
            "versions": {
                "nlsgraph": env!("CARGO_PKG_VERSION"),
                "manifest": 1,
            },
            "wall_time_seconds": self.started.elapsed().as_secs_f64(),
        });
        let path = dir.join("manifest.json");
        let text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
        fs::write(&path, text + "\n").map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
    }
}
