//! Salient stroke attention analysis: which inked strokes of the reference
//! images the decoder looked at while writing a word.

mod container;
mod ink;
mod maps;
mod render;
mod strokes;

use std::path::Path;

use image::RgbImage;
use ndarray::Array2;
use serde::{Deserialize, Serialize};

pub use container::{
    read_container, write_container, ContainerManifest, NamedTensor, TensorEntry, MANIFEST,
};
pub use ink::{
    between_class_variance, histogram, ink_mask, ink_mask_with_kernel, median_filter_binary,
    otsu_threshold, InkMask,
};
pub use maps::{
    average_attention, average_weights, bilinear_resize, min_max_normalize, reconstruct_maps,
    WordAttentionVector,
};
pub use render::{blend, render_grid, HIGHLIGHT};
pub use strokes::{
    connected_components, masked_attention, percentile, salient_strokes, BoundingBox,
    SalientStrokeSet, StrokeComponent, StrokeParams,
};

use crate::error::{Error, Result};
use crate::model::AttentionRecord;

pub const GRID_FILE: &str = "ssaa_grid.png";
pub const CONTAINER_DIR: &str = "attention";

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SsaaConfig {
    pub strokes: StrokeParams,
    pub alpha: f64,
    pub median_kernel: usize,
}

impl Default for SsaaConfig {
    fn default() -> Self {
        Self {
            strokes: StrokeParams::default(),
            alpha: 0.45,
            median_kernel: 3,
        }
    }
}

pub struct SsaaOutput {
    pub word: WordAttentionVector,
    pub maps: Vec<Array2<f64>>,
    pub masks: Vec<InkMask>,
    pub masked: Vec<Array2<f64>>,
    pub strokes: Vec<SalientStrokeSet>,
    pub grid: RgbImage,
}

/// Run every stage on one word's final-layer attention and its reference images.
pub fn run_ssaa(
    record: &AttentionRecord,
    images: &[RgbImage],
    cfg: &SsaaConfig,
) -> Result<SsaaOutput> {
    if images.len() != record.grid.images {
        return Err(Error::InvalidArgument(format!(
            "attention covers {} reference images but {} were given",
            record.grid.images,
            images.len()
        )));
    }
    let (w, h) = images[0].dimensions();
    if w != h || images.iter().any(|im| im.dimensions() != (w, h)) {
        return Err(Error::Shape(
            "reference images must be equal squares".into(),
        ));
    }
    let word = average_attention(record)?;
    let maps = reconstruct_maps(&word, w as usize)?;
    let masks = images
        .iter()
        .map(|im| ink_mask_with_kernel(im, cfg.median_kernel))
        .collect::<Result<Vec<_>>>()?;
    let masked = maps
        .iter()
        .zip(&masks)
        .map(|(m, k)| masked_attention(m, k))
        .collect::<Result<Vec<_>>>()?;
    let strokes = masked
        .iter()
        .map(|m| salient_strokes(m, &cfg.strokes))
        .collect::<Result<Vec<_>>>()?;
    let grid = render_grid(images, &strokes, &record.text, cfg.alpha)?;
    Ok(SsaaOutput {
        word,
        maps,
        masks,
        masked,
        strokes,
        grid,
    })
}

fn stack(name: &str, maps: &[Array2<f64>]) -> Result<NamedTensor> {
    let (h, w) = maps.first().map_or((0, 0), |m| m.dim());
    let data = maps
        .iter()
        .flat_map(|m| m.iter().map(|&v| v as f32))
        .collect();
    NamedTensor::new(name, vec![maps.len(), h, w], data)
}

/// Write the grid raster and an attention container under `dir`.
pub fn save_ssaa(dir: &Path, record: &AttentionRecord, out: &SsaaOutput) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    out.grid.save(dir.join(GRID_FILE))?;
    let (h, k, l) = record.weights.dim();
    let tensors = [
        NamedTensor::new(
            "attention",
            vec![h, k, l],
            record.weights.iter().copied().collect(),
        )?,
        NamedTensor::new(
            "word_attention",
            vec![l],
            out.word.values.iter().map(|&v| v as f32).collect(),
        )?,
        stack("maps", &out.maps)?,
        stack("masked", &out.masked)?,
    ];
    write_container(
        &dir.join(CONTAINER_DIR),
        &record.text,
        record.grid,
        &tensors,
    )?;
    let strokes = dir.join("strokes.json");
    std::fs::write(&strokes, serde_json::to_string_pretty(&out.strokes)?)
        .map_err(|e| Error::io(&strokes, e))
}
