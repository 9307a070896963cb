use candle_core::{DType, Tensor, D};

use super::params::{Init, ParamBuilder};
use super::Ctx;
use crate::error::Result;

/// Affine map over the last axis. Weight layout is `(out, in)`.
#[derive(Clone)]
pub struct Linear {
    weight: Tensor,
    bias: Option<Tensor>,
}

impl Linear {
    /// Xavier-uniform weight, zero bias.
    pub fn new(pb: &mut ParamBuilder, inp: usize, out: usize, bias: bool) -> Result<Self> {
        let bound = (6.0 / (inp + out) as f64).sqrt();
        Self::with_init(pb, inp, out, bias, Init::Uniform(bound))
    }

    pub fn with_init(
        pb: &mut ParamBuilder,
        inp: usize,
        out: usize,
        bias: bool,
        init: Init,
    ) -> Result<Self> {
        let weight = pb.param("weight", &[out, inp], init)?;
        let bias = if bias {
            Some(pb.param("bias", &[out], Init::Zeros)?)
        } else {
            None
        };
        Ok(Self { weight, bias })
    }

    pub fn out_dim(&self) -> usize {
        self.weight.dims()[0]
    }

    pub fn forward(&self, x: &Tensor, ctx: &Ctx) -> Result<Tensor> {
        let dims = x.dims().to_vec();
        let inp = *dims.last().expect("linear input has rank >= 1");
        let rows = x.elem_count() / inp;
        let flat = x.reshape((rows, inp))?;
        let mut y = flat.matmul(&ctx.p(&self.weight).t()?)?;
        if let Some(b) = &self.bias {
            y = y.broadcast_add(&ctx.p(b))?;
        }
        let mut out_dims = dims;
        *out_dims.last_mut().unwrap() = self.out_dim();
        Ok(y.reshape(out_dims)?)
    }
}

/// 2-D convolution, NCHW, square stride and symmetric padding.
#[derive(Clone)]
pub struct Conv2d {
    weight: Tensor,
    bias: Tensor,
    stride: usize,
    padding: usize,
}

impl Conv2d {
    pub fn new(
        pb: &mut ParamBuilder,
        c_in: usize,
        c_out: usize,
        kernel: (usize, usize),
        stride: usize,
        padding: usize,
    ) -> Result<Self> {
        let fan_in = (c_in * kernel.0 * kernel.1) as f64;
        let bound = 1.0 / fan_in.sqrt();
        let weight = pb.param(
            "weight",
            &[c_out, c_in, kernel.0, kernel.1],
            Init::Uniform(bound),
        )?;
        let bias = pb.param("bias", &[c_out], Init::Uniform(bound))?;
        Ok(Self {
            weight,
            bias,
            stride,
            padding,
        })
    }

    pub fn forward(&self, x: &Tensor, ctx: &Ctx) -> Result<Tensor> {
        let weight = ctx.p(&self.weight);
        let (_, _, kh, kw) = weight.dims4()?;
        let y = if kh == self.stride && kw == self.stride && self.padding == 0 {
            super::ops::conv2d_unfold(x, &weight, self.stride, 0)?
        } else {
            x.conv2d(&weight, self.padding, self.stride, 1, 1)?
        };
        let c = self.bias.dims()[0];
        Ok(y.broadcast_add(&ctx.p(&self.bias).reshape((1, c, 1, 1))?)?)
    }
}

/// Layer normalization over the last axis with learnable gain and shift.
#[derive(Clone)]
pub struct LayerNorm {
    gamma: Tensor,
    beta: Tensor,
    eps: f64,
}

impl LayerNorm {
    pub fn new(pb: &mut ParamBuilder, dim: usize) -> Result<Self> {
        Ok(Self {
            gamma: pb.param("weight", &[dim], Init::Ones)?,
            beta: pb.param("bias", &[dim], Init::Zeros)?,
            eps: 1e-5,
        })
    }

    pub fn forward(&self, x: &Tensor, ctx: &Ctx) -> Result<Tensor> {
        let mean = x.mean_keepdim(D::Minus1)?;
        let centered = x.broadcast_sub(&mean)?;
        let var = centered.sqr()?.mean_keepdim(D::Minus1)?;
        let normed = centered.broadcast_div(&(var + self.eps)?.sqrt()?)?;
        Ok(normed
            .broadcast_mul(&ctx.p(&self.gamma))?
            .broadcast_add(&ctx.p(&self.beta))?)
    }
}

/// Lookup table from token ids to vectors.
#[derive(Clone)]
pub struct Embedding {
    table: Tensor,
}

impl Embedding {
    pub fn new(pb: &mut ParamBuilder, count: usize, dim: usize) -> Result<Self> {
        Ok(Self {
            table: pb.param("weight", &[count, dim], Init::Normal(1.0))?,
        })
    }

    pub fn table(&self) -> &Tensor {
        &self.table
    }

    /// `ids` is a `u32` tensor of any shape; output appends the feature axis.
    pub fn forward(&self, ids: &Tensor, ctx: &Ctx) -> Result<Tensor> {
        debug_assert_eq!(ids.dtype(), DType::U32);
        let mut dims = ids.dims().to_vec();
        let flat = ids.flatten_all()?;
        let rows = ctx.p(&self.table).index_select(&flat, 0)?;
        dims.push(self.table.dims()[1]);
        Ok(rows.reshape(dims)?)
    }
}
