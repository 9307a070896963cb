use image::{imageops, GrayImage, Luma, Rgb, RgbImage};

use crate::error::{Error, Result};

/// Height of every word image fed to the critics.
pub const WORD_HEIGHT: u32 = 32;
/// Side of the square canvas the style encoder consumes.
pub const STYLE_CANVAS: u32 = 224;

/// Resize to `height` rows keeping the aspect ratio. Images already at the
/// target height are returned unchanged.
pub fn normalize_height(img: &GrayImage, height: u32) -> GrayImage {
    if img.height() == height {
        return img.clone();
    }
    let width = ((img.width() as f64 * height as f64 / img.height() as f64).round() as u32).max(1);
    imageops::resize(img, width, height, imageops::FilterType::Triangle)
}

/// Paste a word image top-left onto a white `target`x`target` canvas and
/// replicate it into three channels. Never crops or distorts: an image that
/// is too wide after height normalization is rejected.
pub fn preprocess_style_image(raw: &GrayImage, target: u32) -> Result<RgbImage> {
    let word = if raw.height() > WORD_HEIGHT.min(target) {
        normalize_height(raw, WORD_HEIGHT.min(target))
    } else {
        raw.clone()
    };
    if word.width() > target {
        return Err(Error::Oversize {
            width: word.width(),
            target,
        });
    }
    let mut canvas = RgbImage::from_pixel(target, target, Rgb([255, 255, 255]));
    for (x, y, Luma([v])) in word.enumerate_pixels() {
        canvas.put_pixel(x, y, Rgb([*v, *v, *v]));
    }
    Ok(canvas)
}
