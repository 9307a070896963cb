use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Which dimension the attention logits are normalized by.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AttentionScale {
    /// `1/sqrt(d_model)`, as written for the fusion decoder.
    ModelDim,
    /// `1/sqrt(d_model / heads)`, the per-head convention.
    HeadDim,
}

impl AttentionScale {
    pub fn factor(self, dim: usize, heads: usize) -> f64 {
        match self {
            AttentionScale::ModelDim => 1.0 / (dim as f64).sqrt(),
            AttentionScale::HeadDim => 1.0 / ((dim / heads) as f64).sqrt(),
        }
    }
}

/// Architecture hyperparameters for the generator and the three critics.
///
/// Field names double as flat keys in the training config file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ModelConfig {
    pub image_size: usize,
    pub patch_size: usize,
    pub vit_embed_dim: usize,
    pub vit_depth: usize,
    pub vit_heads: usize,
    pub vit_mlp_ratio: usize,
    pub num_style_images: usize,
    pub d_model: usize,
    pub max_text_len: usize,
    pub decoder_layers: usize,
    pub decoder_heads: usize,
    pub decoder_ffn_dim: usize,
    pub attention_scale: AttentionScale,
    pub dropout: f64,
    pub synth_channels: usize,
    pub synth_res_blocks: usize,
    pub critic_channels: usize,
    pub recognizer_hidden: usize,
    pub num_writers: usize,
    pub num_classes: usize,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self::full()
    }
}

impl ModelConfig {
    /// ViT-Small style encoder, 3-layer 8-head decoder at width 512.
    pub fn full() -> Self {
        Self {
            image_size: 224,
            patch_size: 16,
            vit_embed_dim: 384,
            vit_depth: 12,
            vit_heads: 6,
            vit_mlp_ratio: 4,
            num_style_images: 5,
            d_model: 512,
            max_text_len: 32,
            decoder_layers: 3,
            decoder_heads: 8,
            decoder_ffn_dim: 2048,
            attention_scale: AttentionScale::ModelDim,
            dropout: 0.1,
            synth_channels: 256,
            synth_res_blocks: 2,
            critic_channels: 32,
            recognizer_hidden: 128,
            num_writers: 339,
            num_classes: 96,
        }
    }

    /// Small enough to train on a CPU in minutes.
    pub fn desk() -> Self {
        Self {
            patch_size: 32,
            vit_embed_dim: 48,
            vit_depth: 1,
            vit_heads: 2,
            vit_mlp_ratio: 2,
            d_model: 64,
            decoder_ffn_dim: 128,
            dropout: 0.0,
            synth_channels: 32,
            synth_res_blocks: 1,
            critic_channels: 16,
            recognizer_hidden: 64,
            num_writers: 2,
            ..Self::full()
        }
    }

    pub fn grid_side(&self) -> usize {
        self.image_size / self.patch_size
    }

    pub fn patches_per_image(&self) -> usize {
        self.grid_side() * self.grid_side()
    }

    /// Length of the style memory sequence.
    pub fn memory_len(&self) -> usize {
        self.num_style_images * self.patches_per_image()
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(Error::Config(m));
        if self.patch_size == 0 || !self.image_size.is_multiple_of(self.patch_size) {
            return fail(format!(
                "image size {} is not divisible by patch size {}",
                self.image_size, self.patch_size
            ));
        }
        if self.vit_heads == 0 || !self.vit_embed_dim.is_multiple_of(self.vit_heads) {
            return fail(format!(
                "vit_embed_dim {} not divisible by vit_heads {}",
                self.vit_embed_dim, self.vit_heads
            ));
        }
        if self.decoder_heads == 0 || !self.d_model.is_multiple_of(self.decoder_heads) {
            return fail(format!(
                "d_model {} not divisible by decoder_heads {}",
                self.d_model, self.decoder_heads
            ));
        }
        if self.synth_channels < 4 || !self.synth_channels.is_multiple_of(4) {
            return fail(format!(
                "synth_channels {} must be a positive multiple of 4",
                self.synth_channels
            ));
        }
        if self.num_style_images == 0 || self.max_text_len == 0 || self.decoder_layers == 0 {
            return fail(
                "num_style_images, max_text_len and decoder_layers must be positive".into(),
            );
        }
        if self.num_writers == 0 || self.num_classes < 2 {
            return fail("need at least one writer and one symbol".into());
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return fail(format!("dropout {} outside [0, 1)", self.dropout));
        }
        Ok(())
    }
}
