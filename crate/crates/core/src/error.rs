use std::path::PathBuf;

/// Errors raised anywhere in the generation, training and analysis pipeline.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("character {ch:?} is not in the character set")]
    OutOfCharset { ch: char },

    #[error("text of {len} characters exceeds the {max}-character limit")]
    TextTooLong { len: usize, max: usize },

    #[error("empty input: {0}")]
    Empty(String),

    #[error("image of width {width} does not fit the {target}x{target} canvas")]
    Oversize { width: u32, target: u32 },

    #[error("index {index} out of range (limit {limit})")]
    OutOfRange { index: usize, limit: usize },

    #[error("manifest not found at {0}")]
    MissingManifest(PathBuf),

    #[error("malformed manifest line {line}: {reason}")]
    Manifest { line: usize, reason: String },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("non-finite value in {0}")]
    NonFinite(String),

    #[error("attention was not recorded for this forward pass")]
    RecordingDisabled,

    #[error("unknown feature extractor {name:?}; available: {available}")]
    UnknownExtractor { name: String, available: String },

    #[error("checkpoint error: {0}")]
    Checkpoint(String),

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Tensor(#[from] candle_core::Error),

    #[error(transparent)]
    Image(#[from] image::ImageError),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
