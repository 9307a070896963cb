use candle_core::{DType, Tensor};
use image::GrayImage;
use serde::{Deserialize, Serialize};

use super::config::ModelConfig;
use super::fusion::FusedSequence;
use crate::corpus::{WriterId, PX_PER_CHAR, WORD_HEIGHT};
use crate::error::{Error, Result};
use crate::nn::{leaky_relu, Conv2d, Ctx, Init, Linear, ParamBuilder};

const GRID_HEIGHT: usize = 8;
const GRID_WIDTH_PER_TOKEN: usize = 2;
const SLOPE: f64 = 0.2;

/// One rendered word.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratedWordImage {
    /// Height 32, width `16 * text.len()`.
    #[serde(skip)]
    pub image: GrayImage,
    pub text: String,
    pub writer: Option<WriterId>,
    pub seed: u64,
}

#[derive(Clone)]
struct ResBlock {
    c1: Conv2d,
    c2: Conv2d,
}

impl ResBlock {
    fn new(pb: &mut ParamBuilder, ch: usize) -> Result<Self> {
        Ok(Self {
            c1: Conv2d::new(&mut pb.pp("conv1"), ch, ch, (3, 3), 1, 1)?,
            c2: Conv2d::new(&mut pb.pp("conv2"), ch, ch, (3, 3), 1, 1)?,
        })
    }

    fn forward(&self, x: &Tensor, ctx: &Ctx) -> Result<Tensor> {
        let h = self.c1.forward(&leaky_relu(x, SLOPE)?, ctx)?;
        let h = self.c2.forward(&leaky_relu(&h, SLOPE)?, ctx)?;
        Ok((x + h)?)
    }
}

/// Transposed convolution with kernel `(3, 2)`, stride `(1, 2)` and height
/// padding 1: each output column pair comes from one input column.
#[derive(Clone)]
struct WidthDoubling {
    weight: Tensor,
    bias: Tensor,
}

impl WidthDoubling {
    fn new(pb: &mut ParamBuilder, c_in: usize, c_out: usize) -> Result<Self> {
        let bound = 1.0 / ((c_in * 3) as f64).sqrt();
        Ok(Self {
            weight: pb.param("weight", &[c_out, c_in, 3, 2], Init::Uniform(bound))?,
            bias: pb.param("bias", &[c_out], Init::Uniform(bound))?,
        })
    }

    fn forward(&self, x: &Tensor, ctx: &Ctx) -> Result<Tensor> {
        let (b, _, h, w) = x.dims4()?;
        let weight = ctx.p(&self.weight);
        let c_out = weight.dims()[0];
        let padded = x.pad_with_zeros(2, 1, 1)?;
        let phases = (0..2)
            .map(|r| Ok(padded.conv2d(&weight.narrow(3, r, 1)?.contiguous()?, 0, 1, 1, 1)?))
            .collect::<Result<Vec<_>>>()?;
        let y = Tensor::stack(&phases, 4)?.reshape((b, c_out, h, 2 * w))?;
        Ok(y.broadcast_add(&ctx.p(&self.bias).reshape((1, c_out, 1, 1))?)?)
    }
}

/// Linear expansion to an `8 x 2K` grid, residual blocks, two nearest
/// upsamplings and a width-doubling stage, then a `tanh` output channel.
#[derive(Clone)]
pub struct SynthesisHead {
    expand: Linear,
    stages: Vec<(Vec<ResBlock>, Option<Conv2d>)>,
    widen: WidthDoubling,
    tail: Vec<ResBlock>,
    out: Conv2d,
    channels: usize,
}

impl SynthesisHead {
    pub fn new(pb: &mut ParamBuilder, cfg: &ModelConfig) -> Result<Self> {
        let c = cfg.synth_channels;
        let widths = [c, c / 2, c / 4];
        let blocks = |pb: &mut ParamBuilder, ch: usize| -> Result<Vec<ResBlock>> {
            (0..cfg.synth_res_blocks)
                .map(|i| ResBlock::new(&mut pb.pp(format!("res.{i}")), ch))
                .collect()
        };
        let mut stages = Vec::new();
        for (s, &ch) in widths.iter().enumerate() {
            let mut spb = pb.pp(format!("stage.{s}"));
            let res = blocks(&mut spb, ch)?;
            let up = match widths.get(s + 1) {
                Some(&next) => Some(Conv2d::new(&mut spb.pp("up"), ch, next, (3, 3), 1, 1)?),
                None => None,
            };
            stages.push((res, up));
        }
        let last = widths[2];
        let widen = WidthDoubling::new(&mut pb.pp("widen"), last, last)?;
        let tail = blocks(&mut pb.pp("tail"), last)?;
        Ok(Self {
            expand: Linear::new(
                &mut pb.pp("expand"),
                cfg.d_model,
                c * GRID_HEIGHT * GRID_WIDTH_PER_TOKEN,
                true,
            )?,
            stages,
            widen,
            tail,
            out: Conv2d::new(&mut pb.pp("out"), last, 1, (3, 3), 1, 1)?,
            channels: c,
        })
    }

    /// `(B, 1, 32, 16K)` images in `[-1, 1]`.
    pub fn synthesize(&self, fused: &FusedSequence, ctx: &Ctx) -> Result<Tensor> {
        let (k, b, _) = fused.tensor.dims3()?;
        if k == 0 {
            return Err(Error::Empty("fused sequence".into()));
        }
        let finite: f64 = fused
            .tensor
            .abs()?
            .max_all()?
            .to_dtype(DType::F64)?
            .to_scalar()?;
        if !finite.is_finite() {
            return Err(Error::NonFinite("fused sequence".into()));
        }
        let c = self.channels;
        let mask = crate::nn::width_mask(
            &fused.lengths,
            k,
            fused.tensor.dtype(),
            fused.tensor.device(),
        )?
        .t()?
        .unsqueeze(2)?; // (K, B, 1)
        let x = self
            .expand
            .forward(&fused.tensor, ctx)?
            .broadcast_mul(&mask)?;
        let mut x = x
            .reshape((k, b, c, GRID_HEIGHT, GRID_WIDTH_PER_TOKEN))?
            .permute((1, 2, 3, 0, 4))?
            .reshape((b, c, GRID_HEIGHT, k * GRID_WIDTH_PER_TOKEN))?;
        for (res, up) in &self.stages {
            for block in res {
                x = block.forward(&x, ctx)?;
            }
            if let Some(conv) = up {
                let (_, _, h, w) = x.dims4()?;
                x = conv.forward(
                    &leaky_relu(&x.upsample_nearest2d(2 * h, 2 * w)?, SLOPE)?,
                    ctx,
                )?;
            }
        }
        x = self.widen.forward(&leaky_relu(&x, SLOPE)?, ctx)?;
        for block in &self.tail {
            x = block.forward(&x, ctx)?;
        }
        let y = self.out.forward(&leaky_relu(&x, SLOPE)?, ctx)?.tanh()?;
        debug_assert_eq!(
            y.dims(),
            &[b, 1, WORD_HEIGHT as usize, PX_PER_CHAR as usize * k]
        );
        Ok(y)
    }
}

/// Convert `[-1, 1]` pixels to `[0, 255]` greyscale, cropped to each item's length.
pub fn to_word_images(
    images: &Tensor,
    texts: &[&str],
    writers: &[Option<WriterId>],
    seed: u64,
) -> Result<Vec<GeneratedWordImage>> {
    let (b, _, h, w) = images.dims4()?;
    let data: Vec<f32> = images.to_dtype(DType::F32)?.flatten_all()?.to_vec1()?;
    (0..b)
        .map(|i| {
            let text = texts[i];
            let width = (PX_PER_CHAR as usize * text.chars().count()).min(w);
            let plane = &data[i * h * w..(i + 1) * h * w];
            let image = GrayImage::from_fn(width as u32, h as u32, |x, y| {
                let v = plane[y as usize * w + x as usize];
                image::Luma([((v.clamp(-1.0, 1.0) + 1.0) * 127.5).round() as u8])
            });
            Ok(GeneratedWordImage {
                image,
                text: text.to_string(),
                writer: writers.get(i).copied().flatten(),
                seed,
            })
        })
        .collect()
}
