use candle_core::{DType, Device, Tensor, D};

use crate::error::Result;

/// Logistic function expressed through `tanh` so it stays differentiable.
pub fn sigmoid(x: &Tensor) -> Result<Tensor> {
    Ok(((x * 0.5)?.tanh()? * 0.5)?.affine(1.0, 0.5)?)
}

pub fn leaky_relu(x: &Tensor, slope: f64) -> Result<Tensor> {
    Ok(x.maximum(&(x * slope)?)?)
}

pub fn log_softmax_last_dim(x: &Tensor) -> Result<Tensor> {
    let max = x.max_keepdim(D::Minus1)?.detach();
    let shifted = x.broadcast_sub(&max)?;
    let lse = shifted.exp()?.sum_keepdim(D::Minus1)?.log()?;
    Ok(shifted.broadcast_sub(&lse)?)
}

/// Every `step`-th position of axis `dim`, starting at `start`, `count` entries.
fn strided(x: &Tensor, dim: usize, start: usize, step: usize, count: usize) -> Result<Tensor> {
    if step == 1 {
        return Ok(x.narrow(dim, start, count)?);
    }
    let mut dims = x.dims().to_vec();
    let avail = dims[dim] - start;
    let x = if avail < step * count {
        x.pad_with_zeros(dim, 0, step * count - avail)?
    } else {
        x.clone()
    };
    let x = x.narrow(dim, start, step * count)?;
    dims[dim] = count;
    let mut split = dims.clone();
    split.insert(dim + 1, step);
    Ok(x.reshape(split)?.narrow(dim + 1, 0, 1)?.reshape(dims)?)
}

/// Convolution of `x (B, C, H, W)` with `weight (O, C, kh, kw)` as an
/// unfold followed by one matrix product, so the backward pass is matrix
/// products and copies too.
pub fn conv2d_unfold(x: &Tensor, weight: &Tensor, stride: usize, padding: usize) -> Result<Tensor> {
    let (b, c, h, w) = x.dims4()?;
    let (o, ci, kh, kw) = weight.dims4()?;
    if ci != c {
        return Err(crate::error::Error::Shape(format!(
            "conv expects {ci} input channels, got {c}"
        )));
    }
    let (hp, wp) = (h + 2 * padding, w + 2 * padding);
    let ho = (hp - kh) / stride + 1;
    let wo = (wp - kw) / stride + 1;
    let cols = if stride == kh && stride == kw && padding == 0 && hp % kh == 0 && wp % kw == 0 {
        // Non-overlapping patches: a pure relayout.
        x.reshape((b, c, ho, kh, wo, kw))?
            .permute((0, 2, 4, 1, 3, 5))?
            .reshape((b * ho * wo, c * kh * kw))?
    } else {
        let xp = if padding > 0 {
            x.pad_with_zeros(2, padding, padding)?
                .pad_with_zeros(3, padding, padding)?
        } else {
            x.clone()
        };
        let mut taps = Vec::with_capacity(kh * kw);
        for i in 0..kh {
            let rows = strided(&xp, 2, i, stride, ho)?;
            for j in 0..kw {
                taps.push(strided(&rows, 3, j, stride, wo)?);
            }
        }
        Tensor::stack(&taps, 2)? // (B, C, kh*kw, Ho, Wo)
            .permute((0, 3, 4, 1, 2))?
            .reshape((b * ho * wo, c * kh * kw))?
    };
    let y = cols.matmul(&weight.reshape((o, c * kh * kw))?.t()?)?;
    Ok(y.reshape((b, ho, wo, o))?
        .permute((0, 3, 1, 2))?
        .contiguous()?)
}

/// `(batch, width)` tensor with ones on the first `widths[b]` columns.
pub fn width_mask(widths: &[usize], width: usize, dtype: DType, device: &Device) -> Result<Tensor> {
    let mut data = vec![0f32; widths.len() * width];
    for (b, &w) in widths.iter().enumerate() {
        for v in &mut data[b * width..b * width + w.min(width)] {
            *v = 1.0;
        }
    }
    Ok(Tensor::from_vec(data, (widths.len(), width), device)?.to_dtype(dtype)?)
}

/// Mean of `x` along its last axis counting only positions where `mask` is 1.
/// `mask` has shape `(batch, len)`; `x` is `(batch, ..., len)`.
pub fn masked_mean(x: &Tensor, mask: &Tensor) -> Result<Tensor> {
    let rank = x.rank();
    let (b, len) = mask.dims2()?;
    let mut mshape = vec![b];
    mshape.extend(std::iter::repeat_n(1, rank - 2));
    mshape.push(len);
    let m = mask.reshape(mshape)?;
    let total = x.broadcast_mul(&m)?.sum(D::Minus1)?;
    let count = m.sum(D::Minus1)?;
    Ok(total.broadcast_div(&count)?)
}
