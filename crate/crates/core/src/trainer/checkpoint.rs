//! Single-file checkpoints: safetensors entries plus a JSON state blob in the
//! header metadata.

use std::collections::HashMap;
use std::fs;
use std::path::Path;

use candle_core::{Device, Tensor};
use safetensors::SafeTensors;
use serde::{Deserialize, Serialize};

use super::config::TrainConfig;
use super::{LossReport, UpdateCounts};
use crate::corpus::CharsetTokenizer;
use crate::error::{Error, Result};

const STATE_KEY: &str = "state";
pub const FORMAT_VERSION: u32 = 1;

/// Everything besides tensors needed to continue a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckpointState {
    pub format_version: u32,
    /// Iterations completed.
    pub iteration: u64,
    /// Epoch in progress and the next batch within it.
    pub epoch: usize,
    pub batch_in_epoch: usize,
    /// All sampling streams are derived from this seed and the iteration.
    pub rng_seed: u64,
    pub config: TrainConfig,
    pub charset: CharsetTokenizer,
    pub writer_keys: Vec<String>,
    pub optimizer_steps: UpdateCounts,
    pub history: Vec<LossReport>,
}

pub struct Checkpoint {
    pub tensors: HashMap<String, Tensor>,
    pub state: CheckpointState,
}

pub fn save_checkpoint(
    path: &Path,
    entries: &[(String, Tensor)],
    state: &CheckpointState,
) -> Result<()> {
    let meta = HashMap::from([(STATE_KEY.to_string(), serde_json::to_string(state)?)]);
    let contiguous = entries
        .iter()
        .map(|(n, t)| Ok((n.as_str(), t.contiguous()?)))
        .collect::<Result<Vec<_>>>()?;
    let bytes = safetensors::serialize(contiguous, Some(meta))
        .map_err(|e| Error::Checkpoint(e.to_string()))?;
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

pub fn load_checkpoint(path: &Path) -> Result<Checkpoint> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let (_, meta) = SafeTensors::read_metadata(&bytes)
        .map_err(|e| Error::Checkpoint(format!("{}: {e}", path.display())))?;
    let text = meta
        .metadata()
        .as_ref()
        .and_then(|m| m.get(STATE_KEY))
        .ok_or_else(|| Error::Checkpoint(format!("{} has no training state", path.display())))?;
    let state: CheckpointState = serde_json::from_str(text)?;
    if state.format_version != FORMAT_VERSION {
        return Err(Error::Checkpoint(format!(
            "unsupported checkpoint version {}",
            state.format_version
        )));
    }
    let tensors = candle_core::safetensors::load_buffer(&bytes, &Device::Cpu)?;
    Ok(Checkpoint { tensors, state })
}
