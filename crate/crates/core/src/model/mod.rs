//! The generator: style encoder, content encoder, fusion decoder and synthesis head.

mod config;
mod content_encoder;
mod fusion;
mod style_encoder;
mod synthesis;

use std::collections::HashMap;
use std::path::Path;

use candle_core::{DType, Tensor};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub use config::{AttentionScale, ModelConfig};
pub use content_encoder::{ContentEncoder, ContentQuery};
pub use fusion::{
    AttentionRecord, AttentionRecorder, DecoderLayer, FusedSequence, Fusion, FusionCore,
};
pub use style_encoder::{style_tensor, PatchGrid, PatchLocation, StyleEncoder, StyleMemory};
pub use synthesis::{to_word_images, GeneratedWordImage, SynthesisHead};

use crate::corpus::{CharsetTokenizer, StyleSampleSet, WriterId};
use crate::error::{Error, Result};
use crate::nn::{Ctx, ParamStore};

/// Everything one generator pass produces.
#[derive(Debug, Clone)]
pub struct GeneratorOutput {
    /// `(B, 1, 32, 16K)` in `[-1, 1]`.
    pub images: Tensor,
    pub query: ContentQuery,
    pub fusion: Fusion,
}

pub struct Generator {
    cfg: ModelConfig,
    params: ParamStore,
    style: StyleEncoder,
    content: ContentEncoder,
    fusion: FusionCore,
    synthesis: SynthesisHead,
}

impl Generator {
    pub fn new(cfg: &ModelConfig, dtype: DType, seed: u64) -> Result<Self> {
        cfg.validate()?;
        let mut params = ParamStore::new(dtype);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut pb = params.builder(&mut rng);
        let style = StyleEncoder::new(&mut pb.pp("style_encoder"), cfg)?;
        let content = ContentEncoder::new(&mut pb.pp("content_encoder"), cfg)?;
        let fusion = FusionCore::new(&mut pb.pp("fusion_core"), cfg)?;
        let synthesis = SynthesisHead::new(&mut pb.pp("synthesis_head"), cfg)?;
        Ok(Self {
            cfg: cfg.clone(),
            params,
            style,
            content,
            fusion,
            synthesis,
        })
    }

    pub fn config(&self) -> &ModelConfig {
        &self.cfg
    }

    pub fn params(&self) -> &ParamStore {
        &self.params
    }

    pub fn style_encoder(&self) -> &StyleEncoder {
        &self.style
    }

    pub fn content_encoder(&self) -> &ContentEncoder {
        &self.content
    }

    pub fn fusion_core(&self) -> &FusionCore {
        &self.fusion
    }

    pub fn synthesis_head(&self) -> &SynthesisHead {
        &self.synthesis
    }

    /// `styles`: `(B, N, 3, 224, 224)`; one text per batch item.
    pub fn forward(
        &self,
        styles: &Tensor,
        texts: &[&str],
        tokenizer: &CharsetTokenizer,
        record: bool,
        ctx: &Ctx,
    ) -> Result<GeneratorOutput> {
        let b = styles.dims().first().copied().unwrap_or(0);
        if b != texts.len() {
            return Err(Error::Shape(format!(
                "{b} style sets for {} texts",
                texts.len()
            )));
        }
        let memory = self.style.encode(styles, ctx)?;
        let query = self.content.encode(texts, tokenizer, ctx)?;
        let fusion = self.fusion.fuse(&query, &memory, record, ctx)?;
        let images = self.synthesis.synthesize(&fusion.fused, ctx)?;
        Ok(GeneratorOutput {
            images,
            query,
            fusion,
        })
    }

    /// Inference: one word image per `(style set, text)` pair, plus the
    /// final-layer attention of each item when `record` is set.
    pub fn generate(
        &self,
        sets: &[StyleSampleSet],
        texts: &[&str],
        tokenizer: &CharsetTokenizer,
        record: bool,
        seed: u64,
    ) -> Result<(Vec<GeneratedWordImage>, Vec<AttentionRecord>)> {
        let styles = style_tensor(sets, self.params.dtype())?;
        let out = self.forward(&styles, texts, tokenizer, record, &Ctx::eval())?;
        let writers: Vec<Option<WriterId>> = sets.iter().map(|s| Some(s.writer)).collect();
        let images = to_word_images(&out.images, texts, &writers, seed)?;
        let records = if record {
            texts
                .iter()
                .enumerate()
                .map(|(i, t)| out.fusion.final_record(i, t))
                .collect::<Result<Vec<_>>>()?
        } else {
            Vec::new()
        };
        Ok((images, records))
    }

    /// Replace the style encoder weights from a safetensors file whose
    /// entries are named like this generator's `style_encoder.*` parameters.
    pub fn load_style_encoder_weights(&self, path: &Path) -> Result<usize> {
        let tensors: HashMap<String, Tensor> =
            candle_core::safetensors::load(path, &candle_core::Device::Cpu)?;
        let mut loaded = 0;
        for (name, var) in self
            .params
            .iter()
            .filter(|(n, _)| n.starts_with("style_encoder."))
        {
            let t = tensors.get(name).ok_or_else(|| {
                Error::Checkpoint(format!("missing entry {name} in {}", path.display()))
            })?;
            if t.dims() != var.dims() {
                return Err(Error::Checkpoint(format!(
                    "entry {name} has shape {:?}, expected {:?}",
                    t.dims(),
                    var.dims()
                )));
            }
            var.set(&t.to_dtype(self.params.dtype())?)?;
            loaded += 1;
        }
        Ok(loaded)
    }
}
