use candle_core::{Tensor, D};

use super::ops::sigmoid;
use super::params::{Init, ParamBuilder};
use super::Ctx;
use crate::error::Result;

/// Single-direction LSTM over time-major input `(time, batch, features)`.
#[derive(Clone)]
pub struct Lstm {
    w_ih: Tensor,
    w_hh: Tensor,
    bias: Tensor,
    hidden: usize,
}

impl Lstm {
    pub fn new(pb: &mut ParamBuilder, input: usize, hidden: usize) -> Result<Self> {
        let bound = 1.0 / (hidden as f64).sqrt();
        Ok(Self {
            w_ih: pb.param("w_ih", &[4 * hidden, input], Init::Uniform(bound))?,
            w_hh: pb.param("w_hh", &[4 * hidden, hidden], Init::Uniform(bound))?,
            bias: pb.param("bias", &[4 * hidden], Init::Uniform(bound))?,
            hidden,
        })
    }

    /// `mask` is `(time, batch, 1)` with ones on valid frames. Padded frames
    /// leave the state untouched, so the reverse direction starts fresh at
    /// each sequence's true end.
    pub fn forward(&self, x: &Tensor, mask: &Tensor, reverse: bool, ctx: &Ctx) -> Result<Tensor> {
        let (t_len, b, _) = x.dims3()?;
        let w_ih = ctx.p(&self.w_ih);
        let w_hh = ctx.p(&self.w_hh);
        let bias = ctx.p(&self.bias);
        // Input projections for every frame at once.
        let xp = x
            .reshape((t_len * b, x.dim(2)?))?
            .matmul(&w_ih.t()?)?
            .broadcast_add(&bias)?
            .reshape((t_len, b, 4 * self.hidden))?;
        let zeros = Tensor::zeros((b, self.hidden), x.dtype(), x.device())?;
        let mut h = zeros.clone();
        let mut c = zeros;
        let mut outs = vec![None; t_len];
        let order: Vec<usize> = if reverse {
            (0..t_len).rev().collect()
        } else {
            (0..t_len).collect()
        };
        for t in order {
            let gates = xp.get(t)?.add(&h.matmul(&w_hh.t()?)?)?;
            let chunks = gates.chunk(4, D::Minus1)?;
            let i = sigmoid(&chunks[0])?;
            let f = sigmoid(&chunks[1])?;
            let g = chunks[2].tanh()?;
            let o = sigmoid(&chunks[3])?;
            let c_new = f.mul(&c)?.add(&i.mul(&g)?)?;
            let h_new = o.mul(&c_new.tanh()?)?;
            let m = mask.get(t)?;
            c = blend(&c_new, &c, &m)?;
            h = blend(&h_new, &h, &m)?;
            outs[t] = Some(h.clone());
        }
        let outs: Vec<Tensor> = outs
            .into_iter()
            .map(|o| o.expect("every frame visited"))
            .collect();
        Ok(Tensor::stack(&outs, 0)?)
    }
}

fn blend(new: &Tensor, old: &Tensor, mask: &Tensor) -> Result<Tensor> {
    let keep = mask.affine(-1.0, 1.0)?;
    Ok(new.broadcast_mul(mask)?.add(&old.broadcast_mul(&keep)?)?)
}

/// Forward and backward LSTMs with concatenated outputs.
#[derive(Clone)]
pub struct BiLstm {
    fwd: Lstm,
    bwd: Lstm,
}

impl BiLstm {
    pub fn new(pb: &mut ParamBuilder, input: usize, hidden: usize) -> Result<Self> {
        Ok(Self {
            fwd: Lstm::new(&mut pb.pp("fwd"), input, hidden)?,
            bwd: Lstm::new(&mut pb.pp("bwd"), input, hidden)?,
        })
    }

    pub fn forward(&self, x: &Tensor, mask: &Tensor, ctx: &Ctx) -> Result<Tensor> {
        let a = self.fwd.forward(x, mask, false, ctx)?;
        let b = self.bwd.forward(x, mask, true, ctx)?;
        Ok(Tensor::cat(&[a, b], D::Minus1)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::ParamStore;
    use candle_core::{DType, Device};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn padding_does_not_leak_into_reverse_pass() {
        let mut store = ParamStore::new(DType::F64);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let lstm = BiLstm::new(&mut store.builder(&mut rng), 3, 4).unwrap();
        let dev = Device::Cpu;
        let short = Tensor::randn(0f64, 1.0, (2, 1, 3), &dev).unwrap();
        let junk = Tensor::randn(0f64, 1.0, (3, 1, 3), &dev).unwrap();
        let padded = Tensor::cat(&[&short, &junk], 0).unwrap();
        let mask_short = Tensor::ones((2, 1, 1), DType::F64, &dev).unwrap();
        let mask_pad = Tensor::cat(
            &[
                &mask_short,
                &Tensor::zeros((3, 1, 1), DType::F64, &dev).unwrap(),
            ],
            0,
        )
        .unwrap();
        let ctx = Ctx::eval();
        let a = lstm.forward(&short, &mask_short, &ctx).unwrap();
        let b = lstm
            .forward(&padded, &mask_pad, &ctx)
            .unwrap()
            .narrow(0, 0, 2)
            .unwrap();
        let diff = (a - b)
            .unwrap()
            .abs()
            .unwrap()
            .max_all()
            .unwrap()
            .to_scalar::<f64>()
            .unwrap();
        assert!(diff < 1e-12);
    }
}
