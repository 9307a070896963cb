//! Transformer decoder: content queries attend to the style memory.

use candle_core::Tensor;
use ndarray::Array3;
use serde::{Deserialize, Serialize};

use super::config::ModelConfig;
use super::content_encoder::ContentQuery;
use super::style_encoder::{PatchGrid, StyleMemory};
use crate::error::{Error, Result};
use crate::nn::{Ctx, LayerNorm, Linear, MultiHeadAttention, ParamBuilder};

/// Style-infused character embeddings `(K, B, d_model)`.
#[derive(Debug, Clone)]
pub struct FusedSequence {
    pub tensor: Tensor,
    pub lengths: Vec<usize>,
}

/// Cross-attention weights of one batch item, `(H, K, L)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttentionRecord {
    pub weights: Array3<f32>,
    pub text: String,
    pub grid: PatchGrid,
    pub layer: usize,
}

/// Per-layer cross-attention weights `(B, H, K, L)` captured during one pass.
#[derive(Debug, Clone, Default)]
pub struct AttentionRecorder {
    layers: Vec<Tensor>,
}

impl AttentionRecorder {
    pub fn num_layers(&self) -> usize {
        self.layers.len()
    }

    pub fn layer(&self, index: usize) -> Result<&Tensor> {
        self.layers.get(index).ok_or(Error::OutOfRange {
            index,
            limit: self.layers.len(),
        })
    }
}

/// Result of [`FusionCore::fuse`].
#[derive(Debug, Clone)]
pub struct Fusion {
    pub fused: FusedSequence,
    pub recorder: Option<AttentionRecorder>,
    pub grid: PatchGrid,
}

impl Fusion {
    /// Batch weights `(B, H, K, L)` of a decoder layer.
    pub fn attention_of_layer(&self, layer: usize) -> Result<&Tensor> {
        self.recorder
            .as_ref()
            .ok_or(Error::RecordingDisabled)?
            .layer(layer)
    }

    /// Weights of one item cropped to its own length.
    pub fn attention_record(
        &self,
        layer: usize,
        item: usize,
        text: &str,
    ) -> Result<AttentionRecord> {
        let all = self.attention_of_layer(layer)?;
        let (b, h, _, l) = all.dims4()?;
        if item >= b {
            return Err(Error::OutOfRange {
                index: item,
                limit: b,
            });
        }
        let k = self.fused.lengths[item];
        let w = all
            .narrow(0, item, 1)?
            .narrow(2, 0, k)?
            .to_dtype(candle_core::DType::F32)?
            .flatten_all()?
            .to_vec1::<f32>()?;
        Ok(AttentionRecord {
            weights: Array3::from_shape_vec((h, k, l), w)
                .map_err(|e| Error::Shape(e.to_string()))?,
            text: text.to_string(),
            grid: self.grid,
            layer,
        })
    }

    /// Record of the final layer.
    pub fn final_record(&self, item: usize, text: &str) -> Result<AttentionRecord> {
        let n = self
            .recorder
            .as_ref()
            .ok_or(Error::RecordingDisabled)?
            .num_layers();
        self.attention_record(n - 1, item, text)
    }
}

/// Pre-norm decoder layer without a causal mask.
#[derive(Clone)]
pub struct DecoderLayer {
    ln1: LayerNorm,
    self_attn: MultiHeadAttention,
    ln2: LayerNorm,
    cross_attn: MultiHeadAttention,
    ln3: LayerNorm,
    ff1: Linear,
    ff2: Linear,
    dropout: f64,
}

impl DecoderLayer {
    pub fn new(pb: &mut ParamBuilder, cfg: &ModelConfig) -> Result<Self> {
        let d = cfg.d_model;
        let scale = cfg.attention_scale.factor(d, cfg.decoder_heads);
        Ok(Self {
            ln1: LayerNorm::new(&mut pb.pp("ln1"), d)?,
            self_attn: MultiHeadAttention::new(
                &mut pb.pp("self_attn"),
                d,
                cfg.decoder_heads,
                scale,
            )?,
            ln2: LayerNorm::new(&mut pb.pp("ln2"), d)?,
            cross_attn: MultiHeadAttention::new(
                &mut pb.pp("cross_attn"),
                d,
                cfg.decoder_heads,
                scale,
            )?,
            ln3: LayerNorm::new(&mut pb.pp("ln3"), d)?,
            ff1: Linear::new(&mut pb.pp("ff1"), d, cfg.decoder_ffn_dim, true)?,
            ff2: Linear::new(&mut pb.pp("ff2"), cfg.decoder_ffn_dim, d, true)?,
            dropout: cfg.dropout,
        })
    }

    /// `x`: `(B, K, D)`, `memory`: `(B, L, D)`, `pad`: additive `(B, K)`.
    /// Returns the new `x` and cross-attention weights `(B, H, K, L)`.
    pub fn forward(
        &self,
        x: &Tensor,
        memory: &Tensor,
        pad: Option<&Tensor>,
        ctx: &Ctx,
    ) -> Result<(Tensor, Tensor)> {
        let h = self.ln1.forward(x, ctx)?;
        let (a, _) = self.self_attn.forward(&h, &h, pad, ctx)?;
        let x = (x + ctx.dropout(&a, self.dropout)?)?;
        let h = self.ln2.forward(&x, ctx)?;
        let (c, weights) = self.cross_attn.forward(&h, memory, None, ctx)?;
        let x = (x + ctx.dropout(&c, self.dropout)?)?;
        let h = self.ln3.forward(&x, ctx)?;
        let f = self.ff2.forward(&self.ff1.forward(&h, ctx)?.relu()?, ctx)?;
        Ok(((&x + ctx.dropout(&f, self.dropout)?)?, weights))
    }
}

#[derive(Clone)]
pub struct FusionCore {
    layers: Vec<DecoderLayer>,
    norm: LayerNorm,
    d_model: usize,
}

impl FusionCore {
    pub fn new(pb: &mut ParamBuilder, cfg: &ModelConfig) -> Result<Self> {
        let layers = (0..cfg.decoder_layers)
            .map(|i| DecoderLayer::new(&mut pb.pp(format!("layers.{i}")), cfg))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            layers,
            norm: LayerNorm::new(&mut pb.pp("norm"), cfg.d_model)?,
            d_model: cfg.d_model,
        })
    }

    pub fn num_layers(&self) -> usize {
        self.layers.len()
    }

    pub fn fuse(
        &self,
        query: &ContentQuery,
        memory: &StyleMemory,
        record: bool,
        ctx: &Ctx,
    ) -> Result<Fusion> {
        let (k, b, dq) = query.tensor.dims3()?;
        let (_, bm, dm) = memory.tensor.dims3()?;
        if dq != self.d_model || dm != self.d_model || b != bm {
            return Err(Error::Shape(format!(
                "fusion expects (K, B, {d}) queries and (L, B, {d}) memory, got {:?} and {:?}",
                query.tensor.dims(),
                memory.tensor.dims(),
                d = self.d_model
            )));
        }
        let pad = query.key_padding_mask()?;
        let mem = memory.tensor.transpose(0, 1)?.contiguous()?;
        let mut x = query.tensor.transpose(0, 1)?.contiguous()?;
        let mut recorder = record.then(AttentionRecorder::default);
        for layer in &self.layers {
            let (next, weights) = layer.forward(&x, &mem, Some(&pad), ctx)?;
            x = next;
            if let Some(r) = recorder.as_mut() {
                r.layers.push(weights.detach());
            }
        }
        let x = self.norm.forward(&x, ctx)?;
        debug_assert_eq!(x.dims()[1], k);
        Ok(Fusion {
            fused: FusedSequence {
                tensor: x.transpose(0, 1)?.contiguous()?,
                lengths: query.lengths.clone(),
            },
            recorder,
            grid: memory.grid,
        })
    }
}
