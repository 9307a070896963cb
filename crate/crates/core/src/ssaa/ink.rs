use image::{DynamicImage, GrayImage, RgbImage};
use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Binary ink raster of one reference image.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InkMask {
    /// 1 on ink, 0 on background.
    pub mask: Array2<u8>,
    /// Pixels at or below this grey level were classed as ink.
    pub threshold: u8,
    pub median_kernel: usize,
}

impl InkMask {
    pub fn ink_pixels(&self) -> usize {
        self.mask.iter().filter(|&&v| v == 1).count()
    }
}

pub fn histogram(img: &GrayImage) -> [u64; 256] {
    let mut h = [0u64; 256];
    for p in img.pixels() {
        h[p.0[0] as usize] += 1;
    }
    h
}

/// Between-class variance, scaled by `N^2`, when levels `0..=t` form the
/// lower class.
pub fn between_class_variance(hist: &[u64; 256], t: usize) -> f64 {
    let (mut n0, mut s0, mut n, mut s) = (0u64, 0u64, 0u64, 0u64);
    for (v, &c) in hist.iter().enumerate() {
        n += c;
        s += c * v as u64;
        if v <= t {
            n0 += c;
            s0 += c * v as u64;
        }
    }
    let n1 = n - n0;
    if n0 == 0 || n1 == 0 {
        return 0.0;
    }
    // n0 n1 (m0 - m1)^2 = (s0 n1 - s1 n0)^2 / (n0 n1)
    let diff = s0 as f64 * n1 as f64 - (s - s0) as f64 * n0 as f64;
    diff * diff / (n0 as f64 * n1 as f64)
}

/// Otsu's threshold. Among equally good levels the middle of the first
/// maximal run wins, which puts the cut halfway across an empty gap.
/// `None` when the histogram holds fewer than two distinct levels.
pub fn otsu_threshold(hist: &[u64; 256]) -> Option<u8> {
    let scores: Vec<f64> = (0..256).map(|t| between_class_variance(hist, t)).collect();
    let best = scores.iter().copied().fold(0.0, f64::max);
    if best <= 0.0 {
        return None;
    }
    let start = scores.iter().position(|&v| v == best)?;
    let end = start + scores[start..].iter().take_while(|&&v| v == best).count() - 1;
    Some(((start + end) / 2) as u8)
}

/// Majority vote over a `k x k` window with edge replication; the median of
/// a binary window.
pub fn median_filter_binary(mask: &Array2<u8>, k: usize) -> Array2<u8> {
    let (h, w) = mask.dim();
    let r = (k / 2) as isize;
    let clamp = |v: isize, n: usize| v.clamp(0, n as isize - 1) as usize;
    Array2::from_shape_fn((h, w), |(y, x)| {
        let mut ones = 0;
        for dy in -r..=r {
            for dx in -r..=r {
                ones += mask[[clamp(y as isize + dy, h), clamp(x as isize + dx, w)]] as usize;
            }
        }
        u8::from(2 * ones > k * k)
    })
}

/// Otsu-binarized dark strokes of `img`, cleaned by a 3x3 median filter.
pub fn ink_mask(img: &RgbImage) -> Result<InkMask> {
    ink_mask_with_kernel(img, 3)
}

pub fn ink_mask_with_kernel(img: &RgbImage, kernel: usize) -> Result<InkMask> {
    if kernel.is_multiple_of(2) {
        return Err(Error::InvalidArgument(format!(
            "median kernel must be odd, got {kernel}"
        )));
    }
    let grey = DynamicImage::ImageRgb8(img.clone()).into_luma8();
    let (w, h) = grey.dimensions();
    let Some(t) = otsu_threshold(&histogram(&grey)) else {
        log::warn!("style image has a single grey level; ink mask is empty");
        return Ok(InkMask {
            mask: Array2::zeros((h as usize, w as usize)),
            threshold: 0,
            median_kernel: kernel,
        });
    };
    let raw = Array2::from_shape_fn((h as usize, w as usize), |(y, x)| {
        u8::from(grey.get_pixel(x as u32, y as u32).0[0] <= t)
    });
    Ok(InkMask {
        mask: median_filter_binary(&raw, kernel),
        threshold: t,
        median_kernel: kernel,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use image::Rgb;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Between-class variance from class weights and means in floating point.
    fn variance_oracle(hist: &[u64; 256], t: usize) -> f64 {
        let total: f64 = hist.iter().map(|&c| c as f64).sum();
        let (lo, hi) = hist.split_at(t + 1);
        let stats = |part: &[u64], offset: usize| {
            let n: f64 = part.iter().map(|&c| c as f64).sum();
            let s: f64 = part
                .iter()
                .enumerate()
                .map(|(i, &c)| (i + offset) as f64 * c as f64)
                .sum();
            (n / total, if n > 0.0 { s / n } else { 0.0 })
        };
        let (w0, m0) = stats(lo, 0);
        let (w1, m1) = stats(hi, t + 1);
        w0 * w1 * (m0 - m1).powi(2)
    }

    #[test]
    fn otsu_is_exhaustive_argmax() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..20 {
            let mut hist = [0u64; 256];
            for c in hist.iter_mut() {
                *c = rng.random_range(0..500);
            }
            let t = otsu_threshold(&hist).unwrap() as usize;
            let scores: Vec<f64> = (0..256).map(|i| variance_oracle(&hist, i)).collect();
            let best = scores.iter().copied().fold(f64::MIN, f64::max);
            let arg = scores.iter().position(|&v| v == best).unwrap();
            assert!(
                (scores[t] - best).abs() <= 1e-9 * best,
                "t {t} argmax {arg}"
            );
            assert_eq!(t, arg);
        }
    }

    #[test]
    fn bimodal_image_splits_between_modes() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let img = RgbImage::from_fn(32, 32, |_, _| {
            if rng.random_bool(0.3) {
                Rgb([20; 3])
            } else {
                Rgb([235; 3])
            }
        });
        let m = ink_mask_with_kernel(&img, 1).unwrap();
        assert!(m.threshold > 20 && m.threshold < 235);
        for (y, x) in (0..32).flat_map(|y| (0..32).map(move |x| (y, x))) {
            assert_eq!(
                m.mask[[y, x]] == 1,
                img.get_pixel(x as u32, y as u32).0[0] == 20
            );
        }
    }

    #[test]
    fn median_removes_isolated_pixel() {
        let mut img = RgbImage::from_pixel(16, 16, Rgb([255; 3]));
        img.put_pixel(7, 7, Rgb([0; 3]));
        for x in 0..16 {
            img.put_pixel(x, 12, Rgb([0; 3]));
            img.put_pixel(x, 13, Rgb([0; 3]));
        }
        let m = ink_mask(&img).unwrap();
        assert_eq!(m.mask[[7, 7]], 0);
        assert_eq!(m.mask[[12, 5]], 1);
        assert_eq!(m.median_kernel, 3);
    }

    #[test]
    fn blank_image_gives_empty_mask() {
        let m = ink_mask(&RgbImage::from_pixel(8, 8, Rgb([255; 3]))).unwrap();
        assert_eq!(m.ink_pixels(), 0);
    }

    #[test]
    fn even_kernel_is_rejected() {
        assert!(ink_mask_with_kernel(&RgbImage::new(4, 4), 2).is_err());
    }
}
