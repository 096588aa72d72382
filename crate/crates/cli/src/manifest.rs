//! Run manifests: every command writes the resolved configuration next to
//! its outputs so a run can be replayed exactly.

use serde::Serialize;
use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

#[derive(Serialize, Debug)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub seed: u64,
    pub threads: usize,
    /// All resolved flags, sorted by name.
    pub flags: BTreeMap<String, String>,
    pub inputs: Vec<String>,
    pub outputs: Vec<String>,
}

impl RunManifest {
    pub fn new(command: &str, seed: u64, threads: usize) -> Self {
        RunManifest {
            tool: "f2f".to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            command: command.to_string(),
            seed,
            threads,
            flags: BTreeMap::new(),
            inputs: Vec::new(),
            outputs: Vec::new(),
        }
    }

    pub fn flag(&mut self, name: &str, value: impl ToString) -> &mut Self {
        self.flags.insert(name.to_string(), value.to_string());
        self
    }

    pub fn input(&mut self, path: impl ToString) -> &mut Self {
        self.inputs.push(path.to_string());
        self
    }

    pub fn output(&mut self, path: impl ToString) -> &mut Self {
        self.outputs.push(path.to_string());
        self
    }

    /// Writes pretty JSON; content is byte-deterministic for a given
    /// configuration (sorted flags, no timestamps).
    pub fn write(&self, path: &Path) -> f2f_core::Result<()> {
        let json = serde_json::to_string_pretty(self).expect("manifest serializes");
        std::fs::write(path, json + "\n")
            .map_err(|e| f2f_core::Error::io(path.display().to_string(), e))
    }
}

/// Default manifest location: next to the primary output, named
/// `<command>.manifest.json` when the output is a pattern, otherwise
/// `<file>.manifest.json`.
pub fn manifest_path(primary_output: &str, command: &str) -> PathBuf {
    let p = Path::new(primary_output);
    if primary_output.contains('%') {
        let dir = p.parent().unwrap_or_else(|| Path::new("."));
        dir.join(format!("{command}.manifest.json"))
    } else {
        PathBuf::from(format!("{primary_output}.manifest.json"))
    }
}
