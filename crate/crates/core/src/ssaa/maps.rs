use ndarray::{Array2, Array3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{AttentionRecord, PatchGrid, PatchLocation};

/// Attention mass per style-memory entry, averaged over heads and characters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WordAttentionVector {
    pub values: Vec<f64>,
    pub text: String,
    pub grid: PatchGrid,
}

impl WordAttentionVector {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn provenance(&self) -> Vec<PatchLocation> {
        self.grid.table()
    }
}

/// Mean of `weights (H, K, L)` over its first two axes.
pub fn average_weights(weights: &Array3<f32>) -> Result<Vec<f64>> {
    let (h, k, l) = weights.dim();
    if h * k == 0 {
        return Err(Error::Empty("attention tensor".into()));
    }
    if weights.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("attention weights".into()));
    }
    let mut out = vec![0f64; l];
    for row in weights.rows() {
        for (o, &v) in out.iter_mut().zip(row) {
            *o += v as f64;
        }
    }
    let n = (h * k) as f64;
    Ok(out.into_iter().map(|s| s / n).collect())
}

pub fn average_attention(record: &AttentionRecord) -> Result<WordAttentionVector> {
    let values = average_weights(&record.weights)?;
    if values.len() != record.grid.len() {
        return Err(Error::Shape(format!(
            "attention covers {} keys but the patch grid has {}",
            values.len(),
            record.grid.len()
        )));
    }
    Ok(WordAttentionVector {
        values,
        text: record.text.clone(),
        grid: record.grid,
    })
}

/// Bilinear resize with half-pixel centers and edge clamping.
pub fn bilinear_resize(src: &Array2<f64>, out_h: usize, out_w: usize) -> Array2<f64> {
    let (in_h, in_w) = src.dim();
    let axis = |dst: usize, n_in: usize, n_out: usize| {
        let s = ((dst as f64 + 0.5) * n_in as f64 / n_out as f64 - 0.5).max(0.0);
        let i0 = (s.floor() as usize).min(n_in - 1);
        let i1 = (i0 + 1).min(n_in - 1);
        (i0, i1, s - i0 as f64)
    };
    let cols: Vec<_> = (0..out_w).map(|x| axis(x, in_w, out_w)).collect();
    Array2::from_shape_fn((out_h, out_w), |(y, x)| {
        let (y0, y1, fy) = axis(y, in_h, out_h);
        let (x0, x1, fx) = cols[x];
        let top = src[[y0, x0]] * (1.0 - fx) + src[[y0, x1]] * fx;
        let bottom = src[[y1, x0]] * (1.0 - fx) + src[[y1, x1]] * fx;
        top * (1.0 - fy) + bottom * fy
    })
}

/// Rescale to `[0, 1]`; a constant map carries no signal and becomes zeros.
pub fn min_max_normalize(map: &Array2<f64>) -> Array2<f64> {
    let lo = map.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = map.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if hi - lo <= 0.0 {
        return Array2::zeros(map.dim());
    }
    map.mapv(|v| (v - lo) / (hi - lo))
}

/// One `size x size` map in `[0, 1]` per reference image.
pub fn reconstruct_maps(word: &WordAttentionVector, size: usize) -> Result<Vec<Array2<f64>>> {
    let grid = word.grid;
    if word.len() != grid.len() || grid.is_empty() {
        return Err(Error::Shape(format!(
            "{} attention values for a grid of {} images x {} patches",
            word.len(),
            grid.images,
            grid.per_image()
        )));
    }
    let mut maps = Vec::with_capacity(grid.images);
    for (image, block) in word.values.chunks(grid.per_image()).enumerate() {
        let patches = Array2::from_shape_vec((grid.side, grid.side), block.to_vec())
            .map_err(|e| Error::Shape(e.to_string()))?;
        let map = min_max_normalize(&bilinear_resize(&patches, size, size));
        if map.iter().all(|&v| v == 0.0) {
            log::warn!("attention over style image {image} is constant");
        }
        maps.push(map);
    }
    Ok(maps)
}
