//! Dataset directories: `root/manifest.tsv` with tab-separated
//! `relative_path  transcription  writer_key  split` rows plus the images.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::fs;
use std::io::Write;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{normalize_height, CharsetTokenizer, WordSample, WriterId, WORD_HEIGHT};
use crate::error::{Error, Result};

pub const MANIFEST_FILE: &str = "manifest.tsv";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Test,
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Split::Train => "train",
            Split::Test => "test",
        })
    }
}

impl FromStr for Split {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "train" => Ok(Split::Train),
            "test" => Ok(Split::Test),
            other => Err(Error::InvalidArgument(format!("unknown split {other:?}"))),
        }
    }
}

/// Outcome of loading one split.
#[derive(Debug, Clone)]
pub struct LoadReport {
    pub samples: Vec<WordSample>,
    /// `writer_keys[id]` is the manifest key of `WriterId(id)`.
    pub writer_keys: Vec<String>,
    pub skipped_unreadable: usize,
    pub rejected_charset: usize,
    /// Row counts per split name across the whole manifest.
    pub split_sizes: BTreeMap<String, usize>,
}

struct Row {
    line: usize,
    path: String,
    text: String,
    writer: String,
    split: Split,
}

fn parse_manifest(text: &str) -> Result<Vec<Row>> {
    let mut rows = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        if raw.trim().is_empty() || raw.starts_with('#') {
            continue;
        }
        let cols: Vec<&str> = raw.split('\t').collect();
        if line == 1 && cols.first() == Some(&"relative_path") {
            continue;
        }
        if cols.len() != 4 {
            return Err(Error::Manifest {
                line,
                reason: format!("expected 4 tab-separated columns, found {}", cols.len()),
            });
        }
        let split = cols[3].trim().parse().map_err(|_| Error::Manifest {
            line,
            reason: format!("unknown split {:?}", cols[3]),
        })?;
        rows.push(Row {
            line,
            path: cols[0].to_string(),
            text: cols[1].to_string(),
            writer: cols[2].to_string(),
            split,
        });
    }
    Ok(rows)
}

/// Load the `split` rows of a dataset directory.
///
/// Writer keys of the split are sorted and numbered from zero, so ids are
/// stable for a given manifest. Unreadable images are skipped and counted;
/// transcriptions outside `tokenizer` are rejected and counted.
pub fn load_iam_words(
    root: &Path,
    split: Split,
    tokenizer: &CharsetTokenizer,
) -> Result<LoadReport> {
    let manifest = root.join(MANIFEST_FILE);
    if !manifest.is_file() {
        return Err(Error::MissingManifest(manifest));
    }
    let text = fs::read_to_string(&manifest).map_err(|e| Error::io(&manifest, e))?;
    let rows = parse_manifest(&text)?;
    let mut split_sizes = BTreeMap::new();
    for r in &rows {
        *split_sizes.entry(r.split.to_string()).or_insert(0) += 1;
    }
    let chosen: Vec<&Row> = rows.iter().filter(|r| r.split == split).collect();
    if chosen.is_empty() {
        return Err(Error::Empty(format!(
            "no {split} rows in {}",
            manifest.display()
        )));
    }
    let keys: Vec<String> = chosen
        .iter()
        .map(|r| r.writer.clone())
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let id_of: BTreeMap<&str, u32> = keys
        .iter()
        .enumerate()
        .map(|(i, k)| (k.as_str(), i as u32))
        .collect();

    let mut samples = Vec::with_capacity(chosen.len());
    let (mut skipped, mut rejected) = (0, 0);
    for row in chosen {
        if row.text.is_empty() || tokenizer.validate(&row.text).is_err() {
            log::warn!(
                "line {}: transcription {:?} outside the character set",
                row.line,
                row.text
            );
            rejected += 1;
            continue;
        }
        let path = root.join(&row.path);
        let image = match image::open(&path) {
            Ok(img) => normalize_height(&img.to_luma8(), WORD_HEIGHT),
            Err(e) => {
                log::warn!("skipping unreadable image {}: {e}", path.display());
                skipped += 1;
                continue;
            }
        };
        samples.push(WordSample {
            image,
            transcription: row.text.clone(),
            writer: WriterId(id_of[row.writer.as_str()]),
        });
    }
    Ok(LoadReport {
        samples,
        writer_keys: keys,
        skipped_unreadable: skipped,
        rejected_charset: rejected,
        split_sizes,
    })
}

/// Write samples as PNG files plus a manifest in the loader's layout.
pub fn write_dataset(root: &Path, entries: &[(WordSample, Split)]) -> Result<()> {
    let images = root.join("images");
    fs::create_dir_all(&images).map_err(|e| Error::io(&images, e))?;
    let manifest_path = root.join(MANIFEST_FILE);
    let mut manifest = String::from("relative_path\ttranscription\twriter_key\tsplit\n");
    for (i, (sample, split)) in entries.iter().enumerate() {
        if sample.transcription.contains(['\t', '\n']) {
            return Err(Error::InvalidArgument(format!(
                "transcription {:?} contains a tab or newline",
                sample.transcription
            )));
        }
        let rel = format!("images/{split}_{:04}_{i:05}.png", sample.writer.0);
        sample.image.save(root.join(&rel))?;
        manifest.push_str(&format!(
            "{rel}\t{}\twriter_{:04}\t{split}\n",
            sample.transcription, sample.writer.0
        ));
    }
    let mut f = fs::File::create(&manifest_path).map_err(|e| Error::io(&manifest_path, e))?;
    f.write_all(manifest.as_bytes())
        .map_err(|e| Error::io(&manifest_path, e))?;
    Ok(())
}
