//! Styled handwriting generation with a vision-transformer style encoder.

pub mod corpus;
pub mod critics;
pub mod error;
pub mod font;
pub mod metrics;
pub mod model;
pub mod nn;
pub mod ssaa;
pub mod trainer;

pub use candle_core::{DType, Device, Tensor, Var};
pub use error::{Error, Result};
pub use nalgebra::DMatrix;
pub use ndarray::{Array2, Array3};
pub use rand_chacha::ChaCha8Rng;
