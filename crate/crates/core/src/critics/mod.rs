//! Discriminator, text recognizer, writer classifier and their losses.

mod ctc;
mod losses;
mod networks;

use serde::{Deserialize, Serialize};

pub use ctc::{ctc_loss, ctc_loss_per_item, greedy_decode, min_frames};
pub use losses::{hinge_discriminator_loss, hinge_generator_loss, writer_ce_loss};
pub use networks::{Discriminator, Recognizer, WriterClassifier, RECOGNIZER_STRIDE, TRUNK_STRIDE};

/// Critic outputs for one batch, as plain numbers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CriticScores {
    pub d_real: Vec<f64>,
    pub d_fake: Vec<f64>,
    pub tr_loss: f64,
    /// `(B, writers)` rows.
    pub wcn_logits: Vec<Vec<f64>>,
}
