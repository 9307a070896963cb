use std::collections::{BTreeMap, BTreeSet};

use candle_core::{DType, Device, Tensor};
use image::{GrayImage, RgbImage};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::config::{StyleSampling, TrainConfig};
use crate::corpus::pick_indices;
use crate::corpus::{preprocess_style_image, WordSample, WriterId, STYLE_CANVAS};
use crate::critics::TRUNK_STRIDE;
use crate::error::{Error, Result};

const EPOCH_SALT: u64 = 0x9e37_79b9_7f4a_7c15;
const CACHE_LIMIT: usize = 4096;

/// One training batch: real words with labels, reference sets from the same
/// writers, and the texts the generator should write.
#[derive(Debug, Clone)]
pub struct Batch {
    /// `(B, 1, 32, W)`, padded on the right with white.
    pub real: Tensor,
    pub real_widths: Vec<usize>,
    pub real_texts: Vec<String>,
    pub real_writers: Vec<u32>,
    /// `(B, N, 3, 224, 224)`.
    pub styles: Tensor,
    pub style_writers: Vec<u32>,
    pub targets: Vec<String>,
    /// Seed for dropout masks in this iteration.
    pub ctx_seed: u64,
}

impl Batch {
    pub fn len(&self) -> usize {
        self.real_texts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.real_texts.is_empty()
    }
}

/// `[-1, 1]` pixels of grey word images, right-padded with white to a
/// common width that is a multiple of `multiple`.
pub fn word_batch_tensor(
    images: &[&GrayImage],
    multiple: usize,
    dtype: DType,
) -> Result<(Tensor, Vec<usize>)> {
    let h = images
        .first()
        .ok_or_else(|| Error::Empty("image batch".into()))?
        .height() as usize;
    let widths: Vec<usize> = images.iter().map(|im| im.width() as usize).collect();
    let w = widths.iter().copied().max().unwrap_or(0).div_ceil(multiple) * multiple;
    let mut data = vec![1f32; images.len() * h * w];
    for (b, im) in images.iter().enumerate() {
        if im.height() as usize != h {
            return Err(Error::Shape("word images differ in height".into()));
        }
        for (x, y, p) in im.enumerate_pixels() {
            data[b * h * w + y as usize * w + x as usize] = p.0[0] as f32 / 127.5 - 1.0;
        }
    }
    Ok((
        Tensor::from_vec(data, (images.len(), 1, h, w), &Device::Cpu)?.to_dtype(dtype)?,
        widths,
    ))
}

fn canvas_tensor(img: &RgbImage) -> Result<Tensor> {
    let (w, h) = img.dimensions();
    let mut data = Vec::with_capacity(3 * (w * h) as usize);
    for c in 0..3 {
        data.extend(img.pixels().map(|p| p.0[c] as f32 / 127.5 - 1.0));
    }
    Ok(Tensor::from_vec(
        data,
        (3, h as usize, w as usize),
        &Device::Cpu,
    )?)
}

/// Deterministic batch construction from `(seed, epoch, iteration)`.
pub struct BatchSampler<'a> {
    samples: &'a [WordSample],
    eligible: BTreeMap<WriterId, Vec<usize>>,
    fixed: Option<BTreeMap<WriterId, Vec<usize>>>,
    vocab: Vec<String>,
    cache: BTreeMap<usize, Tensor>,
    num_style: usize,
    batch_size: usize,
    seed: u64,
    dtype: DType,
}

impl<'a> BatchSampler<'a> {
    pub fn new(samples: &'a [WordSample], cfg: &TrainConfig, dtype: DType) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::Empty("training corpus".into()));
        }
        let mut eligible: BTreeMap<WriterId, Vec<usize>> = BTreeMap::new();
        for (i, s) in samples.iter().enumerate() {
            let list = eligible.entry(s.writer).or_default();
            if s.image.width() <= STYLE_CANVAS {
                list.push(i);
            }
        }
        if let Some((w, _)) = eligible.iter().find(|(_, v)| v.is_empty()) {
            return Err(Error::InvalidArgument(format!(
                "writer {w} has no word image narrow enough for the style canvas"
            )));
        }
        let fixed = (cfg.style_sampling == StyleSampling::Fixed).then(|| {
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
            eligible
                .iter()
                .map(|(w, pool)| {
                    let picks = pick_indices(&mut rng, pool.len(), cfg.model.num_style_images);
                    (*w, picks.into_iter().map(|i| pool[i]).collect())
                })
                .collect()
        });
        let vocab: Vec<String> = samples
            .iter()
            .map(|s| s.transcription.clone())
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect();
        Ok(Self {
            samples,
            eligible,
            fixed,
            vocab,
            cache: BTreeMap::new(),
            num_style: cfg.model.num_style_images,
            batch_size: cfg.batch_size,
            seed: cfg.seed,
            dtype,
        })
    }

    pub fn batches_per_epoch(&self) -> usize {
        self.samples.len().div_ceil(self.batch_size)
    }

    pub fn vocab(&self) -> &[String] {
        &self.vocab
    }

    /// Sample indices of batch `index` within `epoch`.
    pub fn epoch_batch(&self, epoch: usize, index: usize) -> Vec<usize> {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed ^ EPOCH_SALT);
        rng.set_stream(epoch as u64);
        let mut order: Vec<usize> = (0..self.samples.len()).collect();
        order.shuffle(&mut rng);
        let start = index * self.batch_size;
        order[start..(start + self.batch_size).min(order.len())].to_vec()
    }

    fn canvas(&mut self, index: usize) -> Result<Tensor> {
        if let Some(t) = self.cache.get(&index) {
            return Ok(t.clone());
        }
        let t = canvas_tensor(&preprocess_style_image(
            &self.samples[index].image,
            STYLE_CANVAS,
        )?)?;
        if self.cache.len() < CACHE_LIMIT {
            self.cache.insert(index, t.clone());
        }
        Ok(t)
    }

    pub fn batch(&mut self, indices: &[usize], iteration: u64) -> Result<Batch> {
        if indices.is_empty() {
            return Err(Error::Empty("batch".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(iteration + 1);
        let reals: Vec<&GrayImage> = indices.iter().map(|&i| &self.samples[i].image).collect();
        let (real, real_widths) = word_batch_tensor(&reals, TRUNK_STRIDE, self.dtype)?;
        let mut sets = Vec::with_capacity(indices.len());
        let mut style_writers = Vec::with_capacity(indices.len());
        for &i in indices {
            let writer = self.samples[i].writer;
            let picks = match &self.fixed {
                Some(fixed) => fixed[&writer].clone(),
                None => {
                    let pool = &self.eligible[&writer];
                    pick_indices(&mut rng, pool.len(), self.num_style)
                        .into_iter()
                        .map(|k| pool[k])
                        .collect()
                }
            };
            let canvases = picks
                .iter()
                .map(|&k| self.canvas(k))
                .collect::<Result<Vec<_>>>()?;
            sets.push(Tensor::stack(&canvases, 0)?);
            style_writers.push(writer.0);
        }
        let targets = indices
            .iter()
            .map(|_| self.vocab[rng.random_range(0..self.vocab.len())].clone())
            .collect();
        Ok(Batch {
            real,
            real_widths,
            real_texts: indices
                .iter()
                .map(|&i| self.samples[i].transcription.clone())
                .collect(),
            real_writers: indices.iter().map(|&i| self.samples[i].writer.0).collect(),
            styles: Tensor::stack(&sets, 0)?.to_dtype(self.dtype)?,
            style_writers,
            targets,
            ctx_seed: rng.random(),
        })
    }
}
