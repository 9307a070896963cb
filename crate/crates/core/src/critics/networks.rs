use candle_core::{DType, Tensor, D};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::corpus::WORD_HEIGHT;
use crate::error::{Error, Result};
use crate::model::ModelConfig;
use crate::nn::{
    leaky_relu, log_softmax_last_dim, masked_mean, width_mask, BiLstm, Conv2d, Ctx, Linear,
    ParamBuilder, ParamStore,
};

const SLOPE: f64 = 0.2;

/// Width downsampling of the convolutional trunk.
pub const TRUNK_STRIDE: usize = 16;
/// Frames per pixel of width in the recognizer output.
pub const RECOGNIZER_STRIDE: usize = 4;

fn check_input(images: &Tensor, widths: &[usize], multiple: usize) -> Result<(usize, usize)> {
    let (b, c, h, w) = images.dims4()?;
    if c != 1 || h != WORD_HEIGHT as usize {
        return Err(Error::Shape(format!(
            "critics expect (B, 1, {WORD_HEIGHT}, W) images, got {:?}",
            images.dims()
        )));
    }
    if w % multiple != 0 {
        return Err(Error::Shape(format!(
            "image width {w} is not a multiple of {multiple}"
        )));
    }
    if widths.len() != b || widths.iter().any(|&x| x == 0 || x > w) {
        return Err(Error::Shape(format!(
            "item widths {widths:?} do not fit a batch of {b} at width {w}"
        )));
    }
    Ok((b, w))
}

/// Four stride-2 convolutions to `8 * base` channels at `H/16 x W/16`.
#[derive(Clone)]
struct Trunk {
    convs: Vec<Conv2d>,
    out_channels: usize,
}

impl Trunk {
    fn new(pb: &mut ParamBuilder, base: usize) -> Result<Self> {
        let chans = [1, base, 2 * base, 4 * base, 8 * base];
        let convs = (0..4)
            .map(|i| {
                Conv2d::new(
                    &mut pb.pp(format!("conv.{i}")),
                    chans[i],
                    chans[i + 1],
                    (4, 4),
                    2,
                    1,
                )
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            convs,
            out_channels: 8 * base,
        })
    }

    /// Width-pooled features `(B, channels)`; padding columns are excluded.
    fn forward(&self, images: &Tensor, widths: &[usize], ctx: &Ctx) -> Result<Tensor> {
        let (_, w) = check_input(images, widths, TRUNK_STRIDE)?;
        let mut x = images.clone();
        for conv in &self.convs {
            x = leaky_relu(&conv.forward(&x, ctx)?, SLOPE)?;
        }
        let cols: Vec<usize> = widths.iter().map(|&v| v.div_ceil(TRUNK_STRIDE)).collect();
        let mask = width_mask(&cols, w / TRUNK_STRIDE, x.dtype(), x.device())?;
        masked_mean(&x.mean(2)?, &mask)
    }
}

fn new_store(dtype: DType, seed: u64) -> (ParamStore, ChaCha8Rng) {
    (ParamStore::new(dtype), ChaCha8Rng::seed_from_u64(seed))
}

/// Realism critic on images alone.
pub struct Discriminator {
    params: ParamStore,
    trunk: Trunk,
    head: Linear,
}

impl Discriminator {
    pub fn new(cfg: &ModelConfig, dtype: DType, seed: u64) -> Result<Self> {
        let (mut params, mut rng) = new_store(dtype, seed);
        let mut pb = params.builder(&mut rng);
        let mut pb = pb.pp("discriminator");
        let trunk = Trunk::new(&mut pb.pp("trunk"), cfg.critic_channels)?;
        let head = Linear::new(&mut pb.pp("head"), trunk.out_channels, 1, true)?;
        Ok(Self {
            params,
            trunk,
            head,
        })
    }

    pub fn params(&self) -> &ParamStore {
        &self.params
    }

    /// One score per image, `(B,)`.
    pub fn forward(&self, images: &Tensor, widths: &[usize], ctx: &Ctx) -> Result<Tensor> {
        let f = self.trunk.forward(images, widths, ctx)?;
        Ok(self.head.forward(&f, ctx)?.squeeze(1)?)
    }
}

/// Writer classifier: the discriminator's trunk layout with its own weights.
pub struct WriterClassifier {
    params: ParamStore,
    trunk: Trunk,
    head: Linear,
}

impl WriterClassifier {
    pub fn new(cfg: &ModelConfig, dtype: DType, seed: u64) -> Result<Self> {
        let (mut params, mut rng) = new_store(dtype, seed);
        let mut pb = params.builder(&mut rng);
        let mut pb = pb.pp("writer_classifier");
        let trunk = Trunk::new(&mut pb.pp("trunk"), cfg.critic_channels)?;
        let head = Linear::new(
            &mut pb.pp("head"),
            trunk.out_channels,
            cfg.num_writers,
            true,
        )?;
        Ok(Self {
            params,
            trunk,
            head,
        })
    }

    pub fn params(&self) -> &ParamStore {
        &self.params
    }

    pub fn num_writers(&self) -> usize {
        self.head.out_dim()
    }

    /// `(B, writers)` logits.
    pub fn forward(&self, images: &Tensor, widths: &[usize], ctx: &Ctx) -> Result<Tensor> {
        self.head
            .forward(&self.trunk.forward(images, widths, ctx)?, ctx)
    }

    /// Width-pooled trunk activations `(B, channels)`.
    pub fn features(&self, images: &Tensor, widths: &[usize], ctx: &Ctx) -> Result<Tensor> {
        self.trunk.forward(images, widths, ctx)
    }
}

/// Convolutional features at width stride 4, a bidirectional LSTM and a
/// per-frame projection onto the character classes plus blank.
pub struct Recognizer {
    params: ParamStore,
    convs: Vec<Conv2d>,
    squeeze: Linear,
    rnn: BiLstm,
    proj: Linear,
}

impl Recognizer {
    pub fn new(cfg: &ModelConfig, dtype: DType, seed: u64) -> Result<Self> {
        let (mut params, mut rng) = new_store(dtype, seed);
        let mut pb = params.builder(&mut rng);
        let mut pb = pb.pp("recognizer");
        let c = cfg.critic_channels;
        let convs = vec![
            Conv2d::new(&mut pb.pp("conv.0"), 1, c, (3, 3), 1, 1)?,
            Conv2d::new(&mut pb.pp("conv.1"), c, 2 * c, (4, 4), 2, 1)?,
            Conv2d::new(&mut pb.pp("conv.2"), 2 * c, 4 * c, (4, 4), 2, 1)?,
            Conv2d::new(&mut pb.pp("conv.3"), 4 * c, 4 * c, (3, 3), 1, 1)?,
        ];
        let feat = 4 * c * (WORD_HEIGHT as usize / RECOGNIZER_STRIDE);
        let hidden = cfg.recognizer_hidden;
        let squeeze = Linear::new(&mut pb.pp("squeeze"), feat, hidden, true)?;
        let rnn = BiLstm::new(&mut pb.pp("rnn"), hidden, hidden)?;
        let proj = Linear::new(&mut pb.pp("proj"), 2 * hidden, cfg.num_classes, true)?;
        Ok(Self {
            params,
            convs,
            squeeze,
            rnn,
            proj,
        })
    }

    pub fn params(&self) -> &ParamStore {
        &self.params
    }

    /// Valid frames of an item of pixel width `w`.
    pub fn frames_for(width: usize) -> usize {
        width.div_ceil(RECOGNIZER_STRIDE)
    }

    /// `(T, B, classes)` log-probabilities with `T = W / 4`, plus per-item frame counts.
    pub fn forward(
        &self,
        images: &Tensor,
        widths: &[usize],
        ctx: &Ctx,
    ) -> Result<(Tensor, Vec<usize>)> {
        let (b, w) = check_input(images, widths, RECOGNIZER_STRIDE)?;
        let mut x = images.clone();
        for conv in &self.convs {
            x = leaky_relu(&conv.forward(&x, ctx)?, SLOPE)?;
        }
        let t = w / RECOGNIZER_STRIDE;
        let (_, c, h, _) = x.dims4()?;
        let seq = x.permute((3, 0, 1, 2))?.reshape((t, b, c * h))?;
        let seq = leaky_relu(&self.squeeze.forward(&seq, ctx)?, SLOPE)?;
        let frames: Vec<usize> = widths.iter().map(|&v| Self::frames_for(v)).collect();
        let mask = width_mask(&frames, t, x.dtype(), x.device())?
            .t()?
            .unsqueeze(D::Minus1)?;
        let out = self.rnn.forward(&seq, &mask, ctx)?;
        Ok((
            log_softmax_last_dim(&self.proj.forward(&out, ctx)?)?,
            frames,
        ))
    }
}
