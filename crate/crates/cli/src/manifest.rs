//! Run manifests written next to every output file.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use cplass_core::{McmcConfig, ScoreConfig};

use crate::error::{CliError, Result};
use crate::io::write_text;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InputDigest {
    pub path: String,
    pub sha256: String,
}

/// Everything needed to repeat a run. Wall-clock time is recorded only on
/// request so that repeated runs produce identical files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub args: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub score_config: Option<ScoreConfig>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mcmc_config: Option<McmcConfig>,
    pub inputs: Vec<InputDigest>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub wall_clock_seconds: Option<f64>,
}

impl RunManifest {
    pub fn new(command: &str, args: &[String]) -> Self {
        Self {
            tool: env!("CARGO_PKG_NAME").into(),
            version: env!("CARGO_PKG_VERSION").into(),
            command: command.into(),
            args: args.to_vec(),
            score_config: None,
            mcmc_config: None,
            inputs: Vec::new(),
            seed: None,
            wall_clock_seconds: None,
        }
    }

    pub fn with_configs(mut self, score: &ScoreConfig, mcmc: &McmcConfig) -> Self {
        self.score_config = Some(score.clone());
        self.mcmc_config = Some(mcmc.clone());
        self.seed = Some(mcmc.seed);
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = Some(seed);
        self
    }

    pub fn with_inputs(mut self, paths: &[PathBuf]) -> Result<Self> {
        for p in paths {
            self.inputs.push(digest(p)?);
        }
        Ok(self)
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("serializable");
        s.push('\n');
        s
    }
}

pub fn digest(path: &Path) -> Result<InputDigest> {
    let bytes = std::fs::read(path).map_err(|e| CliError::io(path, e))?;
    let hash = Sha256::digest(&bytes);
    Ok(InputDigest {
        path: path.display().to_string(),
        sha256: hash.iter().map(|b| format!("{b:02x}")).collect(),
    })
}

pub fn sidecar_path(output: &Path) -> PathBuf {
    let mut s = output.as_os_str().to_owned();
    s.push(".manifest.json");
    PathBuf::from(s)
}

/// Writes `text` to `path` and the manifest to its sidecar.
pub fn write_with_manifest(path: &Path, text: &str, manifest: &RunManifest) -> Result<()> {
    write_text(path, text)?;
    write_text(&sidecar_path(path), &manifest.to_json())
}
