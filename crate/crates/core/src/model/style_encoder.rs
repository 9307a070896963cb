//! Vision-transformer backbone turning reference images into the style memory.

use candle_core::{DType, Device, Tensor};
use serde::{Deserialize, Serialize};

use super::config::{AttentionScale, ModelConfig};
use crate::corpus::StyleSampleSet;
use crate::error::{Error, Result};
use crate::nn::{Conv2d, Ctx, Init, LayerNorm, Linear, MultiHeadAttention, ParamBuilder};

/// Where a style-memory entry came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PatchLocation {
    pub image: usize,
    pub row: usize,
    pub col: usize,
}

/// Layout of the style memory: `images` blocks of `side x side` patches,
/// each block row-major.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PatchGrid {
    pub images: usize,
    pub side: usize,
}

impl PatchGrid {
    pub fn per_image(&self) -> usize {
        self.side * self.side
    }

    pub fn len(&self) -> usize {
        self.images * self.per_image()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn locate(&self, index: usize) -> Result<PatchLocation> {
        if index >= self.len() {
            return Err(Error::OutOfRange {
                index,
                limit: self.len(),
            });
        }
        let within = index % self.per_image();
        Ok(PatchLocation {
            image: index / self.per_image(),
            row: within / self.side,
            col: within % self.side,
        })
    }

    pub fn index_of(&self, loc: PatchLocation) -> usize {
        loc.image * self.per_image() + loc.row * self.side + loc.col
    }

    /// Full provenance table in memory order.
    pub fn table(&self) -> Vec<PatchLocation> {
        (0..self.len())
            .map(|i| self.locate(i).expect("in range"))
            .collect()
    }
}

/// Projected patch embeddings of all reference images, `(S_len, B, d_model)`.
#[derive(Debug, Clone)]
pub struct StyleMemory {
    pub tensor: Tensor,
    pub grid: PatchGrid,
}

impl StyleMemory {
    pub fn dims(&self) -> (usize, usize, usize) {
        self.tensor.dims3().expect("memory is rank 3")
    }

    pub fn patch_provenance(&self, index: usize) -> Result<PatchLocation> {
        self.grid.locate(index)
    }
}

#[derive(Clone)]
struct VitBlock {
    ln1: LayerNorm,
    attn: MultiHeadAttention,
    ln2: LayerNorm,
    fc1: Linear,
    fc2: Linear,
}

impl VitBlock {
    fn new(pb: &mut ParamBuilder, cfg: &ModelConfig) -> Result<Self> {
        let d = cfg.vit_embed_dim;
        let scale = AttentionScale::HeadDim.factor(d, cfg.vit_heads);
        Ok(Self {
            ln1: LayerNorm::new(&mut pb.pp("ln1"), d)?,
            attn: MultiHeadAttention::new(&mut pb.pp("attn"), d, cfg.vit_heads, scale)?,
            ln2: LayerNorm::new(&mut pb.pp("ln2"), d)?,
            fc1: Linear::new(&mut pb.pp("fc1"), d, d * cfg.vit_mlp_ratio, true)?,
            fc2: Linear::new(&mut pb.pp("fc2"), d * cfg.vit_mlp_ratio, d, true)?,
        })
    }

    fn forward(&self, x: &Tensor, dropout: f64, ctx: &Ctx) -> Result<Tensor> {
        let h = self.ln1.forward(x, ctx)?;
        let (a, _) = self.attn.forward(&h, &h, None, ctx)?;
        let x = (x + ctx.dropout(&a, dropout)?)?;
        let h = self.ln2.forward(&x, ctx)?;
        let h = self
            .fc2
            .forward(&self.fc1.forward(&h, ctx)?.gelu_erf()?, ctx)?;
        Ok((&x + ctx.dropout(&h, dropout)?)?)
    }
}

/// Patch embedding, CLS token, learned positions, pre-norm encoder blocks,
/// then `LayerNorm(Linear(E[:, 1:, :]))` into the fusion width.
#[derive(Clone)]
pub struct StyleEncoder {
    patch: Conv2d,
    cls: Tensor,
    pos: Tensor,
    blocks: Vec<VitBlock>,
    norm: LayerNorm,
    proj: Linear,
    proj_norm: LayerNorm,
    cfg: ModelConfig,
}

impl StyleEncoder {
    pub fn new(pb: &mut ParamBuilder, cfg: &ModelConfig) -> Result<Self> {
        cfg.validate()?;
        let d = cfg.vit_embed_dim;
        let p = cfg.patch_size;
        let blocks = (0..cfg.vit_depth)
            .map(|i| VitBlock::new(&mut pb.pp(format!("blocks.{i}")), cfg))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            patch: Conv2d::new(&mut pb.pp("patch_embed"), 3, d, (p, p), p, 0)?,
            cls: pb.param("cls_token", &[1, 1, d], Init::TruncNormal(0.02))?,
            pos: pb.param(
                "pos_embed",
                &[1, cfg.patches_per_image() + 1, d],
                Init::TruncNormal(0.02),
            )?,
            blocks,
            norm: LayerNorm::new(&mut pb.pp("norm"), d)?,
            proj: Linear::new(&mut pb.pp("proj"), d, cfg.d_model, true)?,
            proj_norm: LayerNorm::new(&mut pb.pp("proj_norm"), cfg.d_model)?,
            cfg: cfg.clone(),
        })
    }

    pub fn grid(&self) -> PatchGrid {
        PatchGrid {
            images: self.cfg.num_style_images,
            side: self.cfg.grid_side(),
        }
    }

    /// Per-image ViT token embeddings `(S, P + 1, embed)` including CLS.
    pub fn backbone(&self, images: &Tensor, ctx: &Ctx) -> Result<Tensor> {
        let (s, _, _, _) = images.dims4()?;
        let d = self.cfg.vit_embed_dim;
        let x = self.patch.forward(images, ctx)?; // (S, d, side, side)
        let x = x.flatten_from(2)?.transpose(1, 2)?; // (S, P, d)
        let cls = ctx.p(&self.cls).broadcast_as((s, 1, d))?;
        let mut x = Tensor::cat(&[&cls, &x], 1)?.broadcast_add(&ctx.p(&self.pos))?;
        x = ctx.dropout(&x, self.cfg.dropout)?;
        for block in &self.blocks {
            x = block.forward(&x, self.cfg.dropout, ctx)?;
        }
        self.norm.forward(&x, ctx)
    }

    /// `images`: `(B, N, 3, H, W)` in `[-1, 1]`.
    pub fn encode(&self, images: &Tensor, ctx: &Ctx) -> Result<StyleMemory> {
        let dims = images.dims();
        let (n, size) = (self.cfg.num_style_images, self.cfg.image_size);
        if dims.len() != 5 || dims[1] != n || dims[2] != 3 || dims[3] != size || dims[4] != size {
            return Err(Error::Shape(format!(
                "style images must be (B, {n}, 3, {size}, {size}), got {dims:?}"
            )));
        }
        let b = dims[0];
        let flat = images.reshape((b * n, 3, size, size))?;
        let e = self.backbone(&flat, ctx)?;
        let patches = e.narrow(1, 1, self.cfg.patches_per_image())?;
        let proj = self
            .proj_norm
            .forward(&self.proj.forward(&patches, ctx)?, ctx)?;
        let memory = proj
            .reshape((b, n * self.cfg.patches_per_image(), self.cfg.d_model))?
            .transpose(0, 1)?
            .contiguous()?;
        Ok(StyleMemory {
            tensor: memory,
            grid: self.grid(),
        })
    }
}

/// Stack style sets into a `(B, N, 3, H, W)` tensor scaled to `[-1, 1]`.
pub fn style_tensor(sets: &[StyleSampleSet], dtype: DType) -> Result<Tensor> {
    let first = sets
        .first()
        .ok_or_else(|| Error::Empty("style batch".into()))?;
    let n = first.images.len();
    let (w, h) = first.images[0].dimensions();
    let mut data = Vec::with_capacity(sets.len() * n * 3 * (w * h) as usize);
    for set in sets {
        if set.images.len() != n {
            return Err(Error::Shape("style sets differ in image count".into()));
        }
        for img in &set.images {
            if img.dimensions() != (w, h) {
                return Err(Error::Shape(format!(
                    "style image is {:?}, expected {w}x{h}",
                    img.dimensions()
                )));
            }
            for c in 0..3 {
                data.extend(img.pixels().map(|p| p.0[c] as f32 / 127.5 - 1.0));
            }
        }
    }
    Ok(Tensor::from_vec(
        data,
        (sets.len(), n, 3, h as usize, w as usize),
        &Device::Cpu,
    )?
    .to_dtype(dtype)?)
}
