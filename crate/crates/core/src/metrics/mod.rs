//! FID, KID and CER difference between generated and real word images.

mod cer;
mod evaluate;
mod extract;
mod fid;
mod kid;

pub use cer::{cer, delta_cer, levenshtein};
pub use evaluate::{evaluate, evaluate_images, EvalConfig, Evaluation, MetricReport};
pub use extract::{
    extractor_by_name, features_from_container, CtcRecognizer, FeatureExtractor,
    RandomConvExtractor, TextRecognizer, WcnExtractor, EXTRACTORS,
};
pub use fid::{fid, frechet_distance, psd_sqrt, GaussianStats};
pub use kid::{kid, mmd2_unbiased, polynomial_kernel, KidConfig};
