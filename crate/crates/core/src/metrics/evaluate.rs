use std::collections::BTreeMap;

use image::GrayImage;
use serde::{Deserialize, Serialize};

use super::cer::cer;
use super::extract::{extractor_by_name, CtcRecognizer, FeatureExtractor, TextRecognizer};
use super::fid::fid;
use super::kid::{kid, KidConfig};
use crate::corpus::{sample_style_set, WordSample, WriterId};
use crate::error::{Error, Result};
use crate::model::GeneratedWordImage;
use crate::trainer::Trainer;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalConfig {
    pub extractor: String,
    pub kid: KidConfig,
    pub seed: u64,
    pub batch_size: usize,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            extractor: "wcn".into(),
            kid: KidConfig::default(),
            seed: 0,
            batch_size: 16,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub fid: f64,
    /// Scaled by 10^3.
    pub kid: f64,
    pub delta_cer: f64,
    pub cer_generated: f64,
    pub cer_reference: f64,
    pub num_generated: usize,
    pub num_reference: usize,
    pub extractor: String,
    pub recognizer: String,
    pub feature_dim: usize,
}

pub struct Evaluation {
    pub report: MetricReport,
    pub generated: Vec<GeneratedWordImage>,
}

/// Metrics of generated words against real ones.
pub fn evaluate_images(
    generated: &[(GrayImage, String)],
    reference: &[(GrayImage, String)],
    extractor: &dyn FeatureExtractor,
    recognizer: &dyn TextRecognizer,
    kid_cfg: &KidConfig,
) -> Result<MetricReport> {
    if generated.is_empty() || reference.is_empty() {
        return Err(Error::Empty("evaluation set".into()));
    }
    let split = |set: &[(GrayImage, String)]| -> (Vec<GrayImage>, Vec<String>) {
        set.iter().cloned().unzip()
    };
    let (gen_images, gen_texts) = split(generated);
    let (ref_images, ref_texts) = split(reference);
    let fa = extractor.extract(&gen_images)?;
    let fb = extractor.extract(&ref_images)?;
    let pairs = |images: &[GrayImage], texts: Vec<String>| -> Result<Vec<(String, String)>> {
        Ok(recognizer.decode(images)?.into_iter().zip(texts).collect())
    };
    let cer_generated = cer(&pairs(&gen_images, gen_texts)?)?;
    let cer_reference = cer(&pairs(&ref_images, ref_texts)?)?;
    Ok(MetricReport {
        fid: fid(&fa, &fb)?,
        kid: kid(&fa, &fb, kid_cfg)? * 1e3,
        delta_cer: (cer_generated - cer_reference).abs(),
        cer_generated,
        cer_reference,
        num_generated: generated.len(),
        num_reference: reference.len(),
        extractor: extractor.name().to_string(),
        recognizer: recognizer.name().to_string(),
        feature_dim: extractor.feature_dim(),
    })
}

/// Generate one word per split sample, written in a style set drawn from
/// that sample's writer, and score the result against the split.
pub fn evaluate(trainer: &Trainer, split: &[WordSample], cfg: &EvalConfig) -> Result<Evaluation> {
    if split.is_empty() {
        return Err(Error::Empty("evaluation split".into()));
    }
    let model = &trainer.config().model;
    let extractor = extractor_by_name(&cfg.extractor, Some((&trainer.writer_classifier, model)))?;
    let recognizer = CtcRecognizer {
        net: &trainer.recognizer,
        tokenizer: trainer.tokenizer(),
    };
    let mut by_writer: BTreeMap<WriterId, Vec<&WordSample>> = BTreeMap::new();
    for s in split {
        by_writer.entry(s.writer).or_default().push(s);
    }
    let mut generated = Vec::with_capacity(split.len());
    let indices: Vec<usize> = (0..split.len()).collect();
    for chunk in indices.chunks(cfg.batch_size.max(1)) {
        let sets = chunk
            .iter()
            .map(|&i| {
                sample_style_set(
                    &by_writer[&split[i].writer],
                    model.num_style_images,
                    cfg.seed ^ i as u64,
                )
            })
            .collect::<Result<Vec<_>>>()?;
        let texts: Vec<&str> = chunk
            .iter()
            .map(|&i| split[i].transcription.as_str())
            .collect();
        let (images, _) =
            trainer
                .generator
                .generate(&sets, &texts, trainer.tokenizer(), false, cfg.seed)?;
        generated.extend(images);
    }
    let gen_pairs: Vec<(GrayImage, String)> = generated
        .iter()
        .map(|g| (g.image.clone(), g.text.clone()))
        .collect();
    let ref_pairs: Vec<(GrayImage, String)> = split
        .iter()
        .map(|s| (s.image.clone(), s.transcription.clone()))
        .collect();
    let report = evaluate_images(
        &gen_pairs,
        &ref_pairs,
        extractor.as_ref(),
        &recognizer,
        &cfg.kid,
    )?;
    Ok(Evaluation { report, generated })
}
