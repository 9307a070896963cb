use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::ModelConfig;
use crate::nn::AdamConfig;

/// How reference sets are drawn for each training item.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StyleSampling {
    /// A fresh set from the item's writer every batch.
    PerBatch,
    /// One set per writer, drawn once from the run seed.
    Fixed,
}

/// Training hyperparameters. Serialized as one flat table together with the
/// model fields.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    #[serde(flatten)]
    pub model: ModelConfig,
    pub lr_g: f64,
    pub lr_d: f64,
    pub lr_tr: f64,
    pub lr_wcn: f64,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    pub adam_eps: f64,
    pub batch_size: usize,
    pub epochs: usize,
    /// Stop after this many iterations; 0 means run every epoch.
    pub max_iterations: u64,
    pub g_update_period: u64,
    pub seed: u64,
    /// Global gradient-norm ceiling; 0 disables clipping.
    pub grad_clip: f64,
    pub weight_adv: f64,
    pub weight_tr: f64,
    pub weight_wcn: f64,
    pub style_sampling: StyleSampling,
    /// Write a checkpoint every this many epochs (the last epoch always gets one).
    pub checkpoint_every: usize,
    /// Loss reports kept in the in-memory ring buffer and in checkpoints.
    pub history_len: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            model: ModelConfig::full(),
            lr_g: 5e-5,
            lr_d: 5e-5,
            lr_tr: 5e-5,
            lr_wcn: 5e-5,
            adam_beta1: 0.0,
            adam_beta2: 0.999,
            adam_eps: 1e-8,
            batch_size: 16,
            epochs: 30,
            max_iterations: 0,
            g_update_period: 2,
            seed: 0,
            grad_clip: 0.0,
            weight_adv: 1.0,
            weight_tr: 1.0,
            weight_wcn: 1.0,
            style_sampling: StyleSampling::PerBatch,
            checkpoint_every: 1,
            history_len: 10_000,
        }
    }
}

impl TrainConfig {
    /// Shrunken model with larger steps, for CPU overfit runs on small corpora.
    pub fn desk() -> Self {
        Self {
            model: ModelConfig::desk(),
            lr_g: 2e-4,
            lr_d: 2e-4,
            lr_tr: 1e-3,
            lr_wcn: 1e-3,
            batch_size: 8,
            epochs: 400,
            grad_clip: 5.0,
            checkpoint_every: 100,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.model.validate()?;
        for (name, lr) in [
            ("lr_g", self.lr_g),
            ("lr_d", self.lr_d),
            ("lr_tr", self.lr_tr),
            ("lr_wcn", self.lr_wcn),
        ] {
            if !(lr > 0.0) {
                return Err(Error::Config(format!("{name} must be positive, got {lr}")));
            }
        }
        if self.g_update_period == 0 {
            return Err(Error::Config("g_update_period must be at least 1".into()));
        }
        if self.batch_size == 0 || self.epochs == 0 || self.checkpoint_every == 0 {
            return Err(Error::Config(
                "batch_size, epochs and checkpoint_every must be positive".into(),
            ));
        }
        if !(0.0..1.0).contains(&self.adam_beta1) || !(0.0..1.0).contains(&self.adam_beta2) {
            return Err(Error::Config("Adam betas must lie in [0, 1)".into()));
        }
        if self.grad_clip < 0.0 {
            return Err(Error::Config("grad_clip must be nonnegative".into()));
        }
        Ok(())
    }

    pub fn adam(&self, lr: f64) -> AdamConfig {
        AdamConfig {
            lr,
            beta1: self.adam_beta1,
            beta2: self.adam_beta2,
            eps: self.adam_eps,
        }
    }

    pub fn clip(&self) -> Option<f64> {
        (self.grad_clip > 0.0).then_some(self.grad_clip)
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text)
    }
}
