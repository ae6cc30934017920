//! Run manifests.
//!
//! Every artifact-producing command writes a plain-text manifest next to its
//! outputs: the effective configuration (file keys with flag overrides
//! already applied), the seeds in use, checksums of every input and output,
//! and enough metadata to rerun the command. Re-running with the recorded
//! config produces byte-identical checkpoints and CSVs; only the manifest
//! timestamp differs.

use std::fmt::Write as _;
use std::path::Path;
use std::time::{SystemTime, UNIX_EPOCH};

use noisenet_core::Result;

use crate::archive::sha256_hex;

pub struct Manifest {
    command: String,
    config: Vec<(String, String)>,
    inputs: Vec<(String, String)>,
    artifacts: Vec<(String, String)>,
}

impl Manifest {
    pub fn new(command: &str) -> Self {
        Manifest {
            command: command.to_string(),
            config: Vec::new(),
            inputs: Vec::new(),
            artifacts: Vec::new(),
        }
    }

    pub fn config(&mut self, key: &str, value: impl std::fmt::Display) -> &mut Self {
        self.config.push((key.to_string(), value.to_string()));
        self
    }

    pub fn config_all(&mut self, pairs: &[(String, String)]) -> &mut Self {
        self.config.extend(pairs.iter().cloned());
        self
    }

    /// Record an input file with its checksum.
    pub fn input(&mut self, path: &Path) -> Result<&mut Self> {
        let bytes = std::fs::read(path)?;
        self.inputs
            .push((path.display().to_string(), sha256_hex(&bytes)));
        Ok(self)
    }

    /// Record an output file with its checksum. Call after writing it.
    pub fn artifact(&mut self, path: &Path) -> Result<&mut Self> {
        let bytes = std::fs::read(path)?;
        self.artifacts
            .push((path.display().to_string(), sha256_hex(&bytes)));
        Ok(self)
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "# noisenet run manifest");
        let _ = writeln!(out, "version = {}", env!("CARGO_PKG_VERSION"));
        let _ = writeln!(out, "command = {}", self.command);
        let epoch = SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0);
        let _ = writeln!(out, "created_unix = {epoch}");
        if !self.config.is_empty() {
            let _ = writeln!(out, "\n[config]");
            for (k, v) in &self.config {
                let _ = writeln!(out, "{k} = {v}");
            }
        }
        if !self.inputs.is_empty() {
            let _ = writeln!(out, "\n[inputs]");
            for (p, h) in &self.inputs {
                let _ = writeln!(out, "{p} sha256={h}");
            }
        }
        if !self.artifacts.is_empty() {
            let _ = writeln!(out, "\n[artifacts]");
            for (p, h) in &self.artifacts {
                let _ = writeln!(out, "{p} sha256={h}");
            }
        }
        out
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.render())?;
        Ok(())
    }
}
