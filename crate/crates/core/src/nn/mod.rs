//! Minimal neural-network building blocks on top of `candle_core` tensors.
//!
//! Parameters are initialized on the host from a seeded ChaCha stream so that
//! the same seed yields bit-identical networks in `f32` and `f64`.

mod adam;
mod attention;
mod layers;
mod lstm;
mod ops;
mod params;

use std::cell::RefCell;

use candle_core::Tensor;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub use adam::{Adam, AdamConfig, AdamState};
pub use attention::{scaled_dot_product_attention, softmax_last_dim, MultiHeadAttention};
pub use layers::{Conv2d, Embedding, LayerNorm, Linear};
pub use lstm::{BiLstm, Lstm};
pub use ops::{conv2d_unfold, leaky_relu, log_softmax_last_dim, masked_mean, sigmoid, width_mask};
pub use params::{Init, ParamBuilder, ParamStore};

use crate::error::Result;

/// Per-forward-pass execution context.
///
/// `train` enables dropout; `frozen` detaches every parameter read so no
/// gradient can reach the owning network.
pub struct Ctx {
    train: bool,
    frozen: bool,
    rng: RefCell<ChaCha8Rng>,
}

impl Ctx {
    pub fn eval() -> Self {
        Self {
            train: false,
            frozen: false,
            rng: RefCell::new(ChaCha8Rng::seed_from_u64(0)),
        }
    }

    pub fn train(seed: u64) -> Self {
        Self {
            train: true,
            frozen: false,
            rng: RefCell::new(ChaCha8Rng::seed_from_u64(seed)),
        }
    }

    /// Same mode, but parameters are read detached.
    pub fn frozen(&self) -> Self {
        Self {
            train: self.train,
            frozen: true,
            rng: RefCell::new(self.rng.borrow().clone()),
        }
    }

    pub fn is_train(&self) -> bool {
        self.train
    }

    pub fn is_frozen(&self) -> bool {
        self.frozen
    }

    pub(crate) fn p(&self, t: &Tensor) -> Tensor {
        if self.frozen {
            t.detach()
        } else {
            t.clone()
        }
    }

    /// Inverted dropout with a host-drawn mask; identity in eval mode.
    pub fn dropout(&self, x: &Tensor, prob: f64) -> Result<Tensor> {
        if !self.train || prob <= 0.0 {
            return Ok(x.clone());
        }
        let keep = 1.0 - prob;
        let n = x.elem_count();
        let mut rng = self.rng.borrow_mut();
        let mask: Vec<f32> = (0..n)
            .map(|_| {
                if rng.random::<f64>() < keep {
                    (1.0 / keep) as f32
                } else {
                    0.0
                }
            })
            .collect();
        let mask = Tensor::from_vec(mask, x.shape(), x.device())?.to_dtype(x.dtype())?;
        Ok(x.mul(&mask)?)
    }
}
