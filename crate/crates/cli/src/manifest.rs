use std::path::{Path, PathBuf};
use std::time::Instant;

use ich_core::{IchError, Result};
use serde::Serialize;
use sha2::{Digest, Sha256};

pub const MANIFEST_NAME: &str = "manifest.json";

#[derive(Debug, Serialize)]
pub struct OutputFile {
    pub path: String,
    pub sha256: String,
}

/// Written next to the outputs of every command.
#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub config: serde_json::Value,
    pub inputs: Vec<String>,
    pub outputs: Vec<OutputFile>,
    pub tool_version: String,
    pub duration_secs: f64,
    pub seed: Option<u64>,
}

pub struct ManifestBuilder {
    command: String,
    started: Instant,
    out_dir: PathBuf,
    inputs: Vec<String>,
    outputs: Vec<PathBuf>,
}

impl ManifestBuilder {
    pub fn new(command: &str, out_dir: &Path) -> Result<Self> {
        std::fs::create_dir_all(out_dir).map_err(|e| IchError::io(out_dir, e))?;
        Ok(ManifestBuilder {
            command: command.into(),
            started: Instant::now(),
            out_dir: out_dir.to_path_buf(),
            inputs: Vec::new(),
            outputs: Vec::new(),
        })
    }

    pub fn input(&mut self, path: &Path) {
        self.inputs.push(path.display().to_string());
    }

    /// Path of a new output file relative to the output directory.
    pub fn output(&mut self, name: impl AsRef<Path>) -> PathBuf {
        self.outputs.push(name.as_ref().to_path_buf());
        self.out_dir.join(name)
    }

    pub fn finish(self, config: impl Serialize, seed: Option<u64>) -> Result<()> {
        let mut outputs = Vec::with_capacity(self.outputs.len());
        for rel in &self.outputs {
            let full = self.out_dir.join(rel);
            let bytes = std::fs::read(&full).map_err(|e| IchError::io(&full, e))?;
            outputs.push(OutputFile {
                path: rel.to_string_lossy().replace('\\', "/"),
                sha256: hex(&Sha256::digest(&bytes)),
            });
        }
        let manifest = RunManifest {
            command: self.command,
            config: serde_json::to_value(config)?,
            inputs: self.inputs,
            outputs,
            tool_version: env!("CARGO_PKG_VERSION").into(),
            duration_secs: self.started.elapsed().as_secs_f64(),
            seed,
        };
        let path = self.out_dir.join(MANIFEST_NAME);
        let text = serde_json::to_string_pretty(&manifest)? + "\n";
        std::fs::write(&path, text).map_err(|e| IchError::io(&path, e))
    }
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}
