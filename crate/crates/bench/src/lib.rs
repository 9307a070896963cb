//! Fixtures shared by the benchmarks.

use rand::{Rng, SeedableRng};
use scriptgen::corpus::{
    generate_synthetic_corpus, sample_style_set, CharsetTokenizer, StyleSampleSet, WordSample,
};
use scriptgen::{ChaCha8Rng, DMatrix};

pub const WORDS: [&str; 8] = [
    "the", "and", "scholar", "ink", "writer", "style", "hand", "pen",
];

pub fn corpus(writers: usize) -> Vec<WordSample> {
    let words: Vec<String> = WORDS.iter().map(|w| w.to_string()).collect();
    generate_synthetic_corpus(writers, &words, 0, &CharsetTokenizer::ascii())
        .expect("synthetic corpus")
}

/// One style set per item, all from writer 0.
pub fn style_sets(corpus: &[WordSample], n: usize, batch: usize) -> Vec<StyleSampleSet> {
    let refs: Vec<&WordSample> = corpus.iter().filter(|s| s.writer.0 == 0).collect();
    (0..batch as u64)
        .map(|i| sample_style_set(&refs, n, i).expect("style set"))
        .collect()
}

/// `n x d` features with entries in `[-1, 1)`.
pub fn features(n: usize, d: usize, seed: u64) -> DMatrix<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    DMatrix::from_fn(n, d, |_, _| rng.random_range(-1.0..1.0))
}
