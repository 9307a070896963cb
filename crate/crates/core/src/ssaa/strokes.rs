use std::collections::VecDeque;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use super::ink::InkMask;
use crate::error::{Error, Result};

/// Attention restricted to ink; background is exactly zero.
pub fn masked_attention(map: &Array2<f64>, mask: &InkMask) -> Result<Array2<f64>> {
    if map.dim() != mask.mask.dim() {
        return Err(Error::Shape(format!(
            "attention map {:?} and ink mask {:?} differ",
            map.dim(),
            mask.mask.dim()
        )));
    }
    Ok(ndarray::Zip::from(map)
        .and(&mask.mask)
        .map_collect(|&a, &m| if m == 1 { a } else { 0.0 }))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StrokeParams {
    /// Percentile of the nonzero values used as the cut.
    pub percentile: f64,
    pub min_area: usize,
    pub top_k: usize,
}

impl Default for StrokeParams {
    fn default() -> Self {
        Self {
            percentile: 90.0,
            min_area: 20,
            top_k: 5,
        }
    }
}

/// Inclusive pixel bounds `(x0, y0, x1, y1)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BoundingBox {
    pub x0: usize,
    pub y0: usize,
    pub x1: usize,
    pub y1: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StrokeComponent {
    /// `(row, col)` pixels in raster order.
    pub pixels: Vec<(usize, usize)>,
    pub bbox: BoundingBox,
    pub mean_attention: f64,
}

impl StrokeComponent {
    pub fn area(&self) -> usize {
        self.pixels.len()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SalientStrokeSet {
    /// Sorted by mean attention, highest first.
    pub components: Vec<StrokeComponent>,
    pub threshold: f64,
}

impl SalientStrokeSet {
    pub fn empty() -> Self {
        Self {
            components: Vec::new(),
            threshold: 0.0,
        }
    }
}

/// Percentile with linear interpolation between order statistics.
pub fn percentile(values: &[f64], q: f64) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let rank = q / 100.0 * (v.len() - 1) as f64;
    let lo = rank.floor() as usize;
    let hi = rank.ceil() as usize;
    Some(v[lo] + (v[hi] - v[lo]) * (rank - lo as f64))
}

/// 8-connected components of `on`, each listed in raster order and the
/// components ordered by their first pixel.
pub fn connected_components(on: &Array2<bool>) -> Vec<Vec<(usize, usize)>> {
    let (h, w) = on.dim();
    let mut seen = Array2::from_elem((h, w), false);
    let mut out = Vec::new();
    for y in 0..h {
        for x in 0..w {
            if !on[[y, x]] || seen[[y, x]] {
                continue;
            }
            seen[[y, x]] = true;
            let mut queue = VecDeque::from([(y, x)]);
            let mut pixels = Vec::new();
            while let Some((cy, cx)) = queue.pop_front() {
                pixels.push((cy, cx));
                for ny in cy.saturating_sub(1)..=(cy + 1).min(h - 1) {
                    for nx in cx.saturating_sub(1)..=(cx + 1).min(w - 1) {
                        if on[[ny, nx]] && !seen[[ny, nx]] {
                            seen[[ny, nx]] = true;
                            queue.push_back((ny, nx));
                        }
                    }
                }
            }
            pixels.sort_unstable();
            out.push(pixels);
        }
    }
    out
}

/// Strongest connected ink regions of a masked attention map.
pub fn salient_strokes(mai: &Array2<f64>, params: &StrokeParams) -> Result<SalientStrokeSet> {
    if !(0.0..=100.0).contains(&params.percentile) {
        return Err(Error::InvalidArgument(format!(
            "percentile must lie in [0, 100], got {}",
            params.percentile
        )));
    }
    let nonzero: Vec<f64> = mai.iter().copied().filter(|&v| v > 0.0).collect();
    let Some(threshold) = percentile(&nonzero, params.percentile) else {
        return Ok(SalientStrokeSet::empty());
    };
    let on = mai.mapv(|v| v > 0.0 && v >= threshold);
    let mut components: Vec<StrokeComponent> = connected_components(&on)
        .into_iter()
        .filter(|p| p.len() >= params.min_area)
        .map(|pixels| {
            let mean = pixels.iter().map(|&(y, x)| mai[[y, x]]).sum::<f64>() / pixels.len() as f64;
            let bbox = BoundingBox {
                x0: pixels.iter().map(|p| p.1).min().unwrap_or(0),
                y0: pixels.iter().map(|p| p.0).min().unwrap_or(0),
                x1: pixels.iter().map(|p| p.1).max().unwrap_or(0),
                y1: pixels.iter().map(|p| p.0).max().unwrap_or(0),
            };
            StrokeComponent {
                pixels,
                bbox,
                mean_attention: mean,
            }
        })
        .collect();
    components.sort_by(|a, b| b.mean_attention.total_cmp(&a.mean_attention));
    components.truncate(params.top_k);
    Ok(SalientStrokeSet {
        components,
        threshold,
    })
}
