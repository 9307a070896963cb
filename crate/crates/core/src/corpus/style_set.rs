use image::RgbImage;
use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{preprocess_style_image, WordSample, WriterId, STYLE_CANVAS};
use crate::error::{Error, Result};

/// Reference images per writer fed to the style encoder.
pub const NUM_STYLE_IMAGES: usize = 5;

/// `N` preprocessed 224x224 references from one writer.
#[derive(Debug, Clone, PartialEq)]
pub struct StyleSampleSet {
    pub images: Vec<RgbImage>,
    pub writer: WriterId,
    /// Index into the candidate slice for each pick, in image order.
    pub picks: Vec<usize>,
}

/// Choose `n` references from `candidates` (all from one writer).
///
/// Draws without replacement when enough images fit the canvas, otherwise
/// with replacement. Images too wide for the canvas are never picked.
pub fn sample_style_set(candidates: &[&WordSample], n: usize, seed: u64) -> Result<StyleSampleSet> {
    let writer = candidates
        .first()
        .ok_or_else(|| Error::Empty("writer has no word images".into()))?
        .writer;
    if candidates.iter().any(|s| s.writer != writer) {
        return Err(Error::InvalidArgument(
            "style candidates span several writers".into(),
        ));
    }
    let eligible: Vec<usize> = candidates
        .iter()
        .enumerate()
        .filter(|(_, s)| s.image.width() <= STYLE_CANVAS)
        .map(|(i, _)| i)
        .collect();
    if eligible.is_empty() {
        return Err(Error::Oversize {
            width: candidates
                .iter()
                .map(|s| s.image.width())
                .min()
                .unwrap_or(0),
            target: STYLE_CANVAS,
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let picks = pick_indices(&mut rng, eligible.len(), n)
        .into_iter()
        .map(|i| eligible[i])
        .collect::<Vec<_>>();
    let images = picks
        .iter()
        .map(|&i| preprocess_style_image(&candidates[i].image, STYLE_CANVAS))
        .collect::<Result<Vec<_>>>()?;
    Ok(StyleSampleSet {
        images,
        writer,
        picks,
    })
}

/// `n` indices into `0..pool`: distinct when `pool >= n`, with replacement
/// otherwise.
pub(crate) fn pick_indices(rng: &mut impl Rng, pool: usize, n: usize) -> Vec<usize> {
    if pool >= n {
        index::sample(rng, pool, n).into_vec()
    } else {
        (0..n).map(|_| rng.random_range(0..pool)).collect()
    }
}
