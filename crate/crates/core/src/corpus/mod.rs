//! Word images, writers, preprocessing and dataset loading.

mod manifest;
mod preprocess;
mod style_set;
mod synth;
mod tokenizer;

use image::GrayImage;
use serde::{Deserialize, Serialize};

pub use manifest::{load_iam_words, write_dataset, LoadReport, Split, MANIFEST_FILE};
pub use preprocess::{normalize_height, preprocess_style_image, STYLE_CANVAS, WORD_HEIGHT};
pub(crate) use style_set::pick_indices;
pub use style_set::{sample_style_set, StyleSampleSet, NUM_STYLE_IMAGES};
pub use synth::{
    estimate_shear, generate_synthetic_corpus, generate_with_styles, render_word,
    sample_writer_styles, WriterStyle, PX_PER_CHAR,
};
pub use tokenizer::CharsetTokenizer;

/// Contiguous writer index within one dataset split.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct WriterId(pub u32);

impl std::fmt::Display for WriterId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// One word image with its transcription and writer.
#[derive(Debug, Clone, PartialEq)]
pub struct WordSample {
    /// Dark ink on a white background, height [`WORD_HEIGHT`].
    pub image: GrayImage,
    pub transcription: String,
    pub writer: WriterId,
}

/// Group sample indices by writer, preserving sample order.
pub fn samples_by_writer(samples: &[WordSample]) -> Vec<(WriterId, Vec<usize>)> {
    let mut groups: std::collections::BTreeMap<WriterId, Vec<usize>> = Default::default();
    for (i, s) in samples.iter().enumerate() {
        groups.entry(s.writer).or_default().push(i);
    }
    groups.into_iter().collect()
}
