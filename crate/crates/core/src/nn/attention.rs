use candle_core::{Tensor, D};

use super::layers::Linear;
use super::params::ParamBuilder;
use super::Ctx;
use crate::error::{Error, Result};

/// Row-wise softmax over the last axis.
pub fn softmax_last_dim(x: &Tensor) -> Result<Tensor> {
    let max = x.max_keepdim(D::Minus1)?.detach();
    let e = x.broadcast_sub(&max)?.exp()?;
    let s = e.sum_keepdim(D::Minus1)?;
    Ok(e.broadcast_div(&s)?)
}

/// `softmax(q kᵀ · scale + mask) v` on `(batch, heads, len, dim)` tensors.
///
/// `mask` is additive and must broadcast to `(batch, heads, q_len, k_len)`.
/// Returns the attended values and the attention weights.
pub fn scaled_dot_product_attention(
    q: &Tensor,
    k: &Tensor,
    v: &Tensor,
    scale: f64,
    mask: Option<&Tensor>,
) -> Result<(Tensor, Tensor)> {
    let logits = (q.contiguous()?.matmul(&k.t()?.contiguous()?)? * scale)?;
    let logits = match mask {
        Some(m) => logits.broadcast_add(m)?,
        None => logits,
    };
    let weights = softmax_last_dim(&logits)?;
    let out = weights.matmul(&v.contiguous()?)?;
    Ok((out, weights))
}

/// Multi-head attention with separate query and key/value inputs.
#[derive(Clone)]
pub struct MultiHeadAttention {
    q: Linear,
    k: Linear,
    v: Linear,
    o: Linear,
    heads: usize,
    dim: usize,
    scale: f64,
}

impl MultiHeadAttention {
    /// `scale` multiplies the raw logits; callers choose `1/sqrt(dim)` or
    /// `1/sqrt(dim / heads)`.
    pub fn new(pb: &mut ParamBuilder, dim: usize, heads: usize, scale: f64) -> Result<Self> {
        if heads == 0 || !dim.is_multiple_of(heads) {
            return Err(Error::Shape(format!(
                "embedding dim {dim} not divisible by {heads} heads"
            )));
        }
        Ok(Self {
            q: Linear::new(&mut pb.pp("q"), dim, dim, true)?,
            k: Linear::new(&mut pb.pp("k"), dim, dim, true)?,
            v: Linear::new(&mut pb.pp("v"), dim, dim, true)?,
            o: Linear::new(&mut pb.pp("out"), dim, dim, true)?,
            heads,
            dim,
            scale,
        })
    }

    pub fn heads(&self) -> usize {
        self.heads
    }

    fn split(&self, x: &Tensor) -> Result<Tensor> {
        let (b, t, _) = x.dims3()?;
        Ok(x.reshape((b, t, self.heads, self.dim / self.heads))?
            .transpose(1, 2)?)
    }

    /// `query`: `(batch, q_len, dim)`, `kv`: `(batch, k_len, dim)`.
    /// `key_mask` is additive with shape `(batch, k_len)`.
    /// Returns `(batch, q_len, dim)` outputs and `(batch, heads, q_len, k_len)` weights.
    pub fn forward(
        &self,
        query: &Tensor,
        kv: &Tensor,
        key_mask: Option<&Tensor>,
        ctx: &Ctx,
    ) -> Result<(Tensor, Tensor)> {
        let (b, tq, d) = query.dims3()?;
        let (bk, _, dk) = kv.dims3()?;
        if d != self.dim || dk != self.dim || b != bk {
            return Err(Error::Shape(format!(
                "attention expects feature dim {} and equal batch, got query {:?} kv {:?}",
                self.dim,
                query.dims(),
                kv.dims()
            )));
        }
        let q = self.split(&self.q.forward(query, ctx)?)?;
        let k = self.split(&self.k.forward(kv, ctx)?)?;
        let v = self.split(&self.v.forward(kv, ctx)?)?;
        let mask = match key_mask {
            Some(m) => {
                let (_, tk) = m.dims2()?;
                Some(m.reshape((b, 1, 1, tk))?)
            }
            None => None,
        };
        let (out, weights) = scaled_dot_product_attention(&q, &k, &v, self.scale, mask.as_ref())?;
        let out = out.transpose(1, 2)?.reshape((b, tq, self.dim))?;
        Ok((self.o.forward(&out, ctx)?, weights))
    }
}
