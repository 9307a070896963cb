use image::{Rgb, RgbImage};

use super::strokes::SalientStrokeSet;
use crate::error::{Error, Result};
use crate::font::{draw_text, GLYPH_ROWS};

pub const MARGIN: u32 = 8;
pub const GAP: u32 = 8;
pub const CAPTION_SCALE: u32 = 2;
pub const HIGHLIGHT: [u8; 3] = [255, 64, 0];

fn caption_height() -> u32 {
    GLYPH_ROWS as u32 * CAPTION_SCALE + 2 * MARGIN
}

/// `(1 - alpha) * base + alpha * over`, rounded to the nearest level.
pub fn blend(base: u8, over: u8, alpha: f64) -> u8 {
    ((1.0 - alpha) * base as f64 + alpha * over as f64)
        .round()
        .clamp(0.0, 255.0) as u8
}

/// Horizontal strip of the reference images with salient strokes tinted and
/// the word written underneath.
pub fn render_grid(
    images: &[RgbImage],
    strokes: &[SalientStrokeSet],
    word: &str,
    alpha: f64,
) -> Result<RgbImage> {
    if images.is_empty() || images.len() != strokes.len() {
        return Err(Error::InvalidArgument(format!(
            "{} images but {} stroke sets",
            images.len(),
            strokes.len()
        )));
    }
    let (w, h) = images[0].dimensions();
    if images.iter().any(|im| im.dimensions() != (w, h)) {
        return Err(Error::Shape("style images differ in size".into()));
    }
    let n = images.len() as u32;
    let width = 2 * MARGIN + n * w + (n - 1) * GAP;
    let mut out = RgbImage::from_pixel(width, MARGIN + h + caption_height(), Rgb([255; 3]));
    for (i, (img, set)) in images.iter().zip(strokes).enumerate() {
        let mut tile = img.clone();
        for comp in &set.components {
            for &(y, x) in &comp.pixels {
                let p = tile.get_pixel_mut(x as u32, y as u32);
                for c in 0..3 {
                    p.0[c] = blend(p.0[c], HIGHLIGHT[c], alpha);
                }
            }
        }
        image::imageops::replace(
            &mut out,
            &tile,
            (MARGIN + i as u32 * (w + GAP)) as i64,
            MARGIN as i64,
        );
    }
    let text_w = word.chars().count() as u32 * 6 * CAPTION_SCALE;
    let x0 = width.saturating_sub(text_w) / 2;
    draw_text(
        &mut out,
        word,
        x0,
        MARGIN + h + MARGIN,
        CAPTION_SCALE,
        [0; 3],
    );
    Ok(out)
}
