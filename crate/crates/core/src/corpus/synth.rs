//! Procedural handwriting stand-in: dot-matrix glyphs joined into strokes,
//! then sheared, thickened and jittered per writer.

use image::{GrayImage, Luma};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::{CharsetTokenizer, WordSample, WriterId, WORD_HEIGHT};
use crate::error::{Error, Result};
use crate::font::{dot, GLYPH_COLS, GLYPH_ROWS};

/// Horizontal advance of one synthetic character.
pub const PX_PER_CHAR: u32 = 16;

const DOT_DX: f64 = 2.4;
const DOT_DY: f64 = 3.0;
const GLYPH_LEFT: f64 = 3.2;
const GLYPH_TOP: f64 = 7.0;
const SHEAR_PIVOT: f64 = 16.0;

/// Writer-level rendering parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WriterStyle {
    /// Positive values lean the tops of strokes to the right.
    pub slant_deg: f64,
    /// Stroke width class in `1..=3`.
    pub thickness: u8,
    /// Standard deviation of per-character baseline offsets, pixels.
    pub jitter_sigma: f64,
}

impl WriterStyle {
    fn separated_from(&self, other: &WriterStyle) -> bool {
        (self.slant_deg - other.slant_deg).abs() >= 8.0 || self.thickness != other.thickness
    }
}

/// Draw `n` writer styles: slant in [-20, 20] degrees, thickness in {1,2,3},
/// jitter in [0, 1.5] px. Styles are kept pairwise well separated while that
/// is feasible.
pub fn sample_writer_styles(n: usize, seed: u64) -> Vec<WriterStyle> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut styles: Vec<WriterStyle> = Vec::with_capacity(n);
    for _ in 0..n {
        let mut candidate = draw_style(&mut rng);
        for _ in 0..1000 {
            if styles.iter().all(|s| candidate.separated_from(s)) {
                break;
            }
            candidate = draw_style(&mut rng);
        }
        styles.push(candidate);
    }
    styles
}

fn draw_style(rng: &mut ChaCha8Rng) -> WriterStyle {
    WriterStyle {
        slant_deg: rng.random_range(-20.0..=20.0),
        thickness: rng.random_range(1..=3),
        jitter_sigma: rng.random_range(0.0..=1.5),
    }
}

struct Segment {
    a: (f64, f64),
    b: (f64, f64),
}

impl Segment {
    fn distance(&self, p: (f64, f64)) -> f64 {
        let (dx, dy) = (self.b.0 - self.a.0, self.b.1 - self.a.1);
        let len2 = dx * dx + dy * dy;
        let t = if len2 == 0.0 {
            0.0
        } else {
            (((p.0 - self.a.0) * dx + (p.1 - self.a.1) * dy) / len2).clamp(0.0, 1.0)
        };
        let (cx, cy) = (self.a.0 + t * dx, self.a.1 + t * dy);
        ((p.0 - cx).powi(2) + (p.1 - cy).powi(2)).sqrt()
    }
}

fn glyph_segments(ch: char, origin_x: f64, baseline_offset: f64, shear: f64) -> Vec<Segment> {
    let place = |c: usize, r: usize| {
        let x = origin_x + GLYPH_LEFT + c as f64 * DOT_DX;
        let y = GLYPH_TOP + baseline_offset + r as f64 * DOT_DY;
        (x + shear * (SHEAR_PIVOT - y), y)
    };
    let lit = |c: isize, r: isize| c >= 0 && r >= 0 && dot(ch, c as usize, r as usize);
    let mut segs = Vec::new();
    for c in 0..GLYPH_COLS as isize {
        for r in 0..GLYPH_ROWS as isize {
            if !lit(c, r) {
                continue;
            }
            let here = place(c as usize, r as usize);
            segs.push(Segment { a: here, b: here });
            for (dc, dr) in [(1, 0), (0, 1)] {
                if lit(c + dc, r + dr) {
                    segs.push(Segment {
                        a: here,
                        b: place((c + dc) as usize, (r + dr) as usize),
                    });
                }
            }
            // Diagonals only where no orthogonal corner already links the pair.
            for dc in [-1isize, 1] {
                if lit(c + dc, r + 1) && !lit(c + dc, r) && !lit(c, r + 1) {
                    segs.push(Segment {
                        a: here,
                        b: place((c + dc) as usize, (r + 1) as usize),
                    });
                }
            }
        }
    }
    segs
}

/// Render `text` as a `32 x 16·len` grayscale word image in `style`.
pub fn render_word(text: &str, style: &WriterStyle, rng: &mut impl Rng) -> Result<GrayImage> {
    let len = text.chars().count();
    if len == 0 {
        return Err(Error::Empty("word text".into()));
    }
    if !(1..=3).contains(&style.thickness) {
        return Err(Error::InvalidArgument(format!(
            "thickness {} not in 1..=3",
            style.thickness
        )));
    }
    let width = PX_PER_CHAR * len as u32;
    let shear = style.slant_deg.to_radians().tan();
    let radius = 0.5 * style.thickness as f64 + 0.25;
    let jitter = Normal::new(0.0, style.jitter_sigma.max(0.0)).expect("finite sigma");
    let mut ink = vec![false; (width * WORD_HEIGHT) as usize];
    for (i, ch) in text.chars().enumerate() {
        let offset = if style.jitter_sigma > 0.0 {
            jitter.sample(rng).clamp(-4.0, 4.0)
        } else {
            0.0
        };
        for seg in glyph_segments(ch, (i as u32 * PX_PER_CHAR) as f64, offset, shear) {
            let x_lo = (seg.a.0.min(seg.b.0) - radius - 1.0).floor().max(0.0) as u32;
            let x_hi = ((seg.a.0.max(seg.b.0) + radius + 1.0).ceil() as u32).min(width);
            let y_lo = (seg.a.1.min(seg.b.1) - radius - 1.0).floor().max(0.0) as u32;
            let y_hi = ((seg.a.1.max(seg.b.1) + radius + 1.0).ceil() as u32).min(WORD_HEIGHT);
            for y in y_lo..y_hi {
                for x in x_lo..x_hi {
                    if seg.distance((x as f64 + 0.5, y as f64 + 0.5)) <= radius {
                        ink[(y * width + x) as usize] = true;
                    }
                }
            }
        }
    }
    Ok(GrayImage::from_fn(width, WORD_HEIGHT, |x, y| {
        Luma([if ink[(y * width + x) as usize] {
            0
        } else {
            255
        }])
    }))
}

/// One sample per (writer, word), writer-major. A pure function of its
/// arguments.
pub fn generate_synthetic_corpus(
    num_writers: usize,
    words: &[String],
    seed: u64,
    tokenizer: &CharsetTokenizer,
) -> Result<Vec<WordSample>> {
    if num_writers == 0 {
        return Err(Error::InvalidArgument("need at least one writer".into()));
    }
    let styles = sample_writer_styles(num_writers, seed);
    generate_with_styles(&styles, words, seed, tokenizer)
}

/// Like [`generate_synthetic_corpus`] with explicit writer styles.
pub fn generate_with_styles(
    styles: &[WriterStyle],
    words: &[String],
    seed: u64,
    tokenizer: &CharsetTokenizer,
) -> Result<Vec<WordSample>> {
    if styles.is_empty() {
        return Err(Error::InvalidArgument("need at least one writer".into()));
    }
    if words.is_empty() {
        return Err(Error::Empty("word list".into()));
    }
    for w in words {
        if w.is_empty() {
            return Err(Error::Empty("word".into()));
        }
        tokenizer.validate(w)?;
    }
    let mut out = Vec::with_capacity(styles.len() * words.len());
    for (wi, style) in styles.iter().enumerate() {
        for (i, word) in words.iter().enumerate() {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(1 + (wi * words.len() + i) as u64);
            out.push(WordSample {
                image: render_word(word, style, &mut rng)?,
                transcription: word.clone(),
                writer: WriterId(wi as u32),
            });
        }
    }
    Ok(out)
}

/// Slant estimate from the ink-weighted center of mass of each row: the
/// negated least-squares slope of row center versus row index. Positive
/// values mean the strokes lean right. Returns 0 for images without ink.
pub fn estimate_shear(img: &GrayImage) -> f64 {
    let mut rows = Vec::new();
    for y in 0..img.height() {
        let (mut mass, mut moment) = (0.0, 0.0);
        for x in 0..img.width() {
            let w = (255 - img.get_pixel(x, y)[0]) as f64;
            mass += w;
            moment += w * (x as f64 + 0.5);
        }
        if mass > 0.0 {
            rows.push((y as f64 + 0.5, moment / mass, mass));
        }
    }
    let total: f64 = rows.iter().map(|r| r.2).sum();
    if rows.len() < 2 || total == 0.0 {
        return 0.0;
    }
    let my = rows.iter().map(|r| r.0 * r.2).sum::<f64>() / total;
    let mx = rows.iter().map(|r| r.1 * r.2).sum::<f64>() / total;
    let cov = rows
        .iter()
        .map(|r| r.2 * (r.0 - my) * (r.1 - mx))
        .sum::<f64>();
    let var = rows.iter().map(|r| r.2 * (r.0 - my).powi(2)).sum::<f64>();
    if var == 0.0 {
        0.0
    } else {
        -cov / var
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn words(ws: &[&str]) -> Vec<String> {
        ws.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn corpus_is_deterministic() {
        let t = CharsetTokenizer::ascii();
        let a = generate_synthetic_corpus(2, &words(&["the", "and"]), 7, &t).unwrap();
        let b = generate_synthetic_corpus(2, &words(&["the", "and"]), 7, &t).unwrap();
        assert_eq!(a.len(), 4);
        for (x, y) in a.iter().zip(&b) {
            assert_eq!(x.image.as_raw(), y.image.as_raw());
        }
        let c = generate_synthetic_corpus(2, &words(&["the", "and"]), 8, &t).unwrap();
        assert!(a.iter().zip(&c).any(|(x, y)| x.image != y.image));
    }

    #[test]
    fn one_writer_one_word_gives_one_sample() {
        let t = CharsetTokenizer::ascii();
        let s = generate_synthetic_corpus(1, &words(&["ink"]), 0, &t).unwrap();
        assert_eq!(s.len(), 1);
        assert_eq!(s[0].image.dimensions(), (48, 32));
        assert_eq!(s[0].writer, WriterId(0));
    }

    #[test]
    fn slanted_writer_drifts_more() {
        let t = CharsetTokenizer::ascii();
        let upright = WriterStyle {
            slant_deg: 0.0,
            thickness: 2,
            jitter_sigma: 0.0,
        };
        let slanted = WriterStyle {
            slant_deg: 15.0,
            ..upright
        };
        let ws = words(&["handwriting", "lilt", "HM"]);
        let s = generate_with_styles(&[upright, slanted], &ws, 3, &t).unwrap();
        let mut gaps = Vec::new();
        for i in 0..ws.len() {
            let a = estimate_shear(&s[i].image);
            let b = estimate_shear(&s[ws.len() + i].image);
            assert!(b > a + 0.12, "word {i}: upright {a}, slanted {b}");
            gaps.push(b - a);
        }
        let mean = gaps.iter().sum::<f64>() / gaps.len() as f64;
        // Horizontal strokes pull the estimate below tan(15°) ≈ 0.268.
        assert!((0.12..=0.3).contains(&mean), "{gaps:?}");
    }

    #[test]
    fn rejects_bad_inputs() {
        let t = CharsetTokenizer::ascii();
        assert!(matches!(
            generate_synthetic_corpus(1, &words(&["na\u{ef}ve"]), 0, &t),
            Err(Error::OutOfCharset { .. })
        ));
        assert!(generate_synthetic_corpus(0, &words(&["a"]), 0, &t).is_err());
        assert!(generate_synthetic_corpus(1, &[], 0, &t).is_err());
    }

    #[test]
    fn styles_stay_in_range_and_distinct() {
        let styles = sample_writer_styles(12, 5);
        for (i, s) in styles.iter().enumerate() {
            assert!((-20.0..=20.0).contains(&s.slant_deg));
            assert!((1..=3).contains(&s.thickness));
            assert!((0.0..=1.5).contains(&s.jitter_sigma));
            for o in &styles[..i] {
                assert_ne!(s, o);
            }
        }
        let two = sample_writer_styles(2, 9);
        assert!(two[0].separated_from(&two[1]));
    }

    #[test]
    fn thicker_strokes_carry_more_ink() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let ink = |t: u8, rng: &mut ChaCha8Rng| {
            let style = WriterStyle {
                slant_deg: 0.0,
                thickness: t,
                jitter_sigma: 0.0,
            };
            render_word("stroke", &style, rng)
                .unwrap()
                .pixels()
                .filter(|p| p[0] == 0)
                .count()
        };
        let (a, b, c) = (ink(1, &mut rng), ink(2, &mut rng), ink(3, &mut rng));
        assert!(a < b && b < c);
    }
}
