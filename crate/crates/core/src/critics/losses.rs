use candle_core::Tensor;

use crate::error::{Error, Result};
use crate::nn::log_softmax_last_dim;

fn non_empty(x: &Tensor, what: &str) -> Result<()> {
    if x.elem_count() == 0 {
        return Err(Error::Empty(format!("{what} scores")));
    }
    Ok(())
}

/// `mean(-D(fake))`.
pub fn hinge_generator_loss(d_fake: &Tensor) -> Result<Tensor> {
    non_empty(d_fake, "fake")?;
    Ok(d_fake.mean_all()?.neg()?)
}

/// `mean(max(1 - D(real), 0)) + mean(max(1 + D(fake), 0))`.
pub fn hinge_discriminator_loss(d_real: &Tensor, d_fake: &Tensor) -> Result<Tensor> {
    non_empty(d_real, "real")?;
    non_empty(d_fake, "fake")?;
    let real = d_real.affine(-1.0, 1.0)?.relu()?.mean_all()?;
    let fake = d_fake.affine(1.0, 1.0)?.relu()?.mean_all()?;
    Ok((real + fake)?)
}

/// Mean softmax cross-entropy of `(B, classes)` logits.
pub fn writer_ce_loss(logits: &Tensor, labels: &[u32]) -> Result<Tensor> {
    let (b, classes) = logits.dims2()?;
    if labels.len() != b {
        return Err(Error::Shape(format!(
            "{b} logit rows for {} labels",
            labels.len()
        )));
    }
    let mut onehot = vec![0f32; b * classes];
    for (i, &l) in labels.iter().enumerate() {
        if l as usize >= classes {
            return Err(Error::OutOfRange {
                index: l as usize,
                limit: classes,
            });
        }
        onehot[i * classes + l as usize] = 1.0;
    }
    let onehot =
        Tensor::from_vec(onehot, (b, classes), logits.device())?.to_dtype(logits.dtype())?;
    let picked = log_softmax_last_dim(logits)?.mul(&onehot)?.sum_all()?;
    Ok((picked.neg()? / b as f64)?)
}
