use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use chrono::{DateTime, Utc};
use serde::Serialize;
use sha2::{Digest, Sha256};

pub const RUN_MANIFEST: &str = "run_manifest.json";

#[derive(Debug, Serialize)]
pub struct Artifact {
    pub path: PathBuf,
    pub sha256: String,
}

/// Record of one command invocation, enough to replay it.
#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub args: Vec<String>,
    pub seed: u64,
    pub config: serde_json::Value,
    pub checkpoint_sha256: Option<String>,
    pub artifacts: Vec<Artifact>,
    pub started: DateTime<Utc>,
    pub finished: DateTime<Utc>,
}

pub fn sha256_file(path: &Path) -> Result<String> {
    let bytes = fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

impl RunManifest {
    pub fn new(command: &str, seed: u64, config: serde_json::Value) -> Self {
        let now = Utc::now();
        Self {
            command: command.into(),
            args: std::env::args().collect(),
            seed,
            config,
            checkpoint_sha256: None,
            artifacts: Vec::new(),
            started: now,
            finished: now,
        }
    }

    pub fn checkpoint(&mut self, path: &Path) -> Result<()> {
        self.checkpoint_sha256 = Some(sha256_file(path)?);
        Ok(())
    }

    /// Hash `path` and list it relative to `root` when possible.
    pub fn artifact(&mut self, root: &Path, path: &Path) -> Result<()> {
        let sha256 = sha256_file(path)?;
        let shown = path.strip_prefix(root).unwrap_or(path).to_path_buf();
        self.artifacts.push(Artifact {
            path: shown,
            sha256,
        });
        Ok(())
    }

    pub fn write(mut self, path: &Path) -> Result<()> {
        self.finished = Utc::now();
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            fs::create_dir_all(dir)?;
        }
        fs::write(path, serde_json::to_string_pretty(&self)?)
            .with_context(|| format!("writing {}", path.display()))
    }
}
