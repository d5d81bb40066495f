use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::ExperimentConfig;
use crate::error::{CliError, Result};

pub const MANIFEST_VERSION: u32 = 1;

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

/// Provenance record written next to the artifacts of one stage.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub schema_version: u32,
    pub stage: String,
    pub software_version: String,
    pub config_hash: String,
    pub seed: u64,
    /// Paths relative to the output directory.
    pub artifacts: Vec<String>,
    /// Wall-clock seconds per step.
    pub timings: BTreeMap<String, f64>,
    pub summary: serde_json::Value,
}

impl RunManifest {
    pub fn path(out: &Path, stage: &str) -> PathBuf {
        out.join(format!("manifest_{stage}.json"))
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::input(path, e))?;
        serde_json::from_str(&text).map_err(|e| CliError::input(path, e))
    }
}

/// Collects artifacts and timings while a stage runs.
pub(crate) struct Recorder {
    stage: &'static str,
    out: PathBuf,
    artifacts: Vec<String>,
    timings: BTreeMap<String, f64>,
}

impl Recorder {
    pub fn new(stage: &'static str, out: &Path) -> Result<Self> {
        std::fs::create_dir_all(out).map_err(|e| CliError::io(out, e))?;
        Ok(Self { stage, out: out.to_path_buf(), artifacts: Vec::new(), timings: BTreeMap::new() })
    }

    pub fn time<T>(&mut self, step: &str, f: impl FnOnce() -> Result<T>) -> Result<T> {
        let start = Instant::now();
        let value = f()?;
        *self.timings.entry(step.to_string()).or_default() += start.elapsed().as_secs_f64();
        Ok(value)
    }

    /// Writes `bytes` to `out/name` and records it as an artifact.
    pub fn write(&mut self, name: &str, bytes: &[u8]) -> Result<()> {
        let path = self.out.join(name);
        std::fs::write(&path, bytes).map_err(|e| CliError::io(&path, e))?;
        self.artifacts.push(name.to_string());
        Ok(())
    }

    pub fn finish(self, config: &ExperimentConfig, summary: serde_json::Value) -> Result<RunManifest> {
        let manifest = RunManifest {
            schema_version: MANIFEST_VERSION,
            stage: self.stage.to_string(),
            software_version: env!("CARGO_PKG_VERSION").to_string(),
            config_hash: config.hash(),
            seed: config.seed,
            artifacts: self.artifacts,
            timings: self.timings,
            summary,
        };
        let path = RunManifest::path(&self.out, self.stage);
        let json = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
        std::fs::write(&path, json).map_err(|e| CliError::io(&path, e))?;
        Ok(manifest)
    }
}
