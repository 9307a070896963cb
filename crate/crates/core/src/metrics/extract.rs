use std::path::Path;

use candle_core::DType;
use image::GrayImage;
use nalgebra::DMatrix;

use crate::corpus::CharsetTokenizer;
use crate::critics::{greedy_decode, Recognizer, WriterClassifier, TRUNK_STRIDE};
use crate::error::{Error, Result};
use crate::model::ModelConfig;
use crate::nn::Ctx;
use crate::ssaa::read_container;
use crate::trainer::word_batch_tensor;

const CHUNK: usize = 32;
const RANDOM_SEED: u64 = 0x5eed;
pub const EXTRACTORS: [&str; 2] = ["wcn", "random-conv"];

/// Maps word images to fixed-length feature vectors.
pub trait FeatureExtractor {
    fn name(&self) -> &str;
    fn feature_dim(&self) -> usize;
    fn deterministic(&self) -> bool {
        true
    }
    /// `(images, feature_dim)`.
    fn extract(&self, images: &[GrayImage]) -> Result<DMatrix<f64>>;
}

fn trunk_features(net: &WriterClassifier, images: &[GrayImage]) -> Result<DMatrix<f64>> {
    if images.is_empty() {
        return Err(Error::Empty("feature extraction input".into()));
    }
    let mut rows: Vec<f64> = Vec::new();
    let mut dim = 0;
    for chunk in images.chunks(CHUNK) {
        let refs: Vec<&GrayImage> = chunk.iter().collect();
        let (x, widths) = word_batch_tensor(&refs, TRUNK_STRIDE, DType::F32)?;
        let f = net.features(&x, &widths, &Ctx::eval())?;
        dim = f.dims()[1];
        rows.extend(f.to_dtype(DType::F64)?.flatten_all()?.to_vec1::<f64>()?);
    }
    Ok(DMatrix::from_row_slice(images.len(), dim, &rows))
}

/// Pooled trunk activations of a trained writer classifier.
pub struct WcnExtractor<'a> {
    net: &'a WriterClassifier,
    dim: usize,
}

impl<'a> WcnExtractor<'a> {
    pub fn new(net: &'a WriterClassifier, cfg: &ModelConfig) -> Self {
        Self {
            net,
            dim: 8 * cfg.critic_channels,
        }
    }
}

impl FeatureExtractor for WcnExtractor<'_> {
    fn name(&self) -> &str {
        "wcn"
    }

    fn feature_dim(&self) -> usize {
        self.dim
    }

    fn extract(&self, images: &[GrayImage]) -> Result<DMatrix<f64>> {
        trunk_features(self.net, images)
    }
}

/// The same trunk with fixed random weights; needs no training.
pub struct RandomConvExtractor {
    net: WriterClassifier,
    dim: usize,
}

impl RandomConvExtractor {
    pub fn new(channels: usize) -> Result<Self> {
        let cfg = ModelConfig {
            critic_channels: channels,
            num_writers: 1,
            ..ModelConfig::desk()
        };
        Ok(Self {
            net: WriterClassifier::new(&cfg, DType::F32, RANDOM_SEED)?,
            dim: 8 * channels,
        })
    }
}

impl FeatureExtractor for RandomConvExtractor {
    fn name(&self) -> &str {
        "random-conv"
    }

    fn feature_dim(&self) -> usize {
        self.dim
    }

    fn extract(&self, images: &[GrayImage]) -> Result<DMatrix<f64>> {
        trunk_features(&self.net, images)
    }
}

/// Build a named extractor. `wcn` needs the trained classifier.
pub fn extractor_by_name<'a>(
    name: &str,
    wcn: Option<(&'a WriterClassifier, &ModelConfig)>,
) -> Result<Box<dyn FeatureExtractor + 'a>> {
    match (name, wcn) {
        ("wcn", Some((net, cfg))) => Ok(Box::new(WcnExtractor::new(net, cfg))),
        ("random-conv", _) => Ok(Box::new(RandomConvExtractor::new(16)?)),
        _ => Err(Error::UnknownExtractor {
            name: name.to_string(),
            available: EXTRACTORS.join(", "),
        }),
    }
}

/// Precomputed features: a tensor container holding one `(n, d)` tensor
/// named `features`.
pub fn features_from_container(dir: &Path) -> Result<DMatrix<f64>> {
    let (_, tensors) = read_container(dir)?;
    let t = tensors
        .into_iter()
        .find(|t| t.name == "features")
        .ok_or_else(|| {
            Error::InvalidArgument(format!("{} has no `features` tensor", dir.display()))
        })?;
    let [n, d] = t.shape[..] else {
        return Err(Error::Shape(format!(
            "features must be 2-D, got {:?}",
            t.shape
        )));
    };
    Ok(DMatrix::from_row_iterator(
        n,
        d,
        t.data.iter().map(|&v| v as f64),
    ))
}

/// Reads word images back into text.
pub trait TextRecognizer {
    fn name(&self) -> &str;
    fn decode(&self, images: &[GrayImage]) -> Result<Vec<String>>;
}

/// The trained recognizer critic with greedy CTC decoding.
pub struct CtcRecognizer<'a> {
    pub net: &'a Recognizer,
    pub tokenizer: &'a CharsetTokenizer,
}

impl TextRecognizer for CtcRecognizer<'_> {
    fn name(&self) -> &str {
        "recognizer-greedy-ctc"
    }

    fn decode(&self, images: &[GrayImage]) -> Result<Vec<String>> {
        let mut out = Vec::with_capacity(images.len());
        for chunk in images.chunks(CHUNK) {
            let refs: Vec<&GrayImage> = chunk.iter().collect();
            let (x, widths) = word_batch_tensor(&refs, TRUNK_STRIDE, DType::F32)?;
            let (lp, frames) = self.net.forward(&x, &widths, &Ctx::eval())?;
            for ids in greedy_decode(&lp, &frames, self.tokenizer.blank_index())? {
                out.push(self.tokenizer.decode(&ids)?);
            }
        }
        Ok(out)
    }
}
