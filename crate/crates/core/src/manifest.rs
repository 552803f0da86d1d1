//! Run manifests: everything needed to repeat a run, as plain text.
//!
//! Manifests never contain wall-clock time, so repeating a run reproduces
//! its manifest byte for byte. A timestamp is recorded only when the caller
//! supplies one (the CLI takes it from `SOURCE_DATE_EPOCH`).

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::metrics::RRMSE_DEFINITION;
use crate::synth::RNG_ID;

pub const VERSION: &str = concat!("pgru ", env!("CARGO_PKG_VERSION"));

/// An input file and the hex SHA-256 of its contents.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InputDigest {
    pub role: String,
    pub path: String,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunManifest {
    pub command: String,
    pub config: Vec<(String, String)>,
    pub inputs: Vec<InputDigest>,
    pub outputs: Vec<String>,
    pub timestamp: Option<String>,
}

impl RunManifest {
    pub fn new(command: &str, config: Vec<(&str, String)>) -> Self {
        RunManifest {
            command: command.to_string(),
            config: config
                .into_iter()
                .map(|(k, v)| (k.to_string(), v))
                .collect(),
            inputs: Vec::new(),
            outputs: Vec::new(),
            timestamp: None,
        }
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "version = {VERSION}");
        let _ = writeln!(s, "command = {}", self.command);
        let _ = writeln!(
            s,
            "timestamp = {}",
            self.timestamp.as_deref().unwrap_or("unrecorded")
        );
        let _ = writeln!(s, "rng = {RNG_ID}");
        let _ = writeln!(s, "{RRMSE_DEFINITION}");
        s.push_str("\n[config]\n");
        for (k, v) in &self.config {
            let _ = writeln!(s, "{k} = {v}");
        }
        s.push_str("\n[inputs]\n");
        for i in &self.inputs {
            let _ = writeln!(s, "{} = {} sha256:{}", i.role, i.path, i.sha256);
        }
        s.push_str("\n[outputs]\n");
        for o in &self.outputs {
            let _ = writeln!(s, "{o}");
        }
        s
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_text()).map_err(|e| Error::io(path, e))
    }

    /// The `[config]` section of a manifest as `key = value` text, ready to
    /// be fed back as a config file.
    pub fn config_section(text: &str) -> String {
        let mut out = String::new();
        let mut inside = false;
        for line in text.lines() {
            if line.starts_with('[') {
                inside = line == "[config]";
            } else if inside && !line.is_empty() {
                out.push_str(line);
                out.push('\n');
            }
        }
        out
    }
}
