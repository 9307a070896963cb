//! Connectionist temporal classification over log-probabilities.

use candle_core::{CpuStorage, CustomOp1, Layout, Shape, Tensor};

use crate::error::{Error, Result};

fn log_add(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let m = a.max(b);
    m + ((a - m).exp() + (b - m).exp()).ln()
}

/// Minimum frames needed for `target`: one per symbol plus one blank
/// between each pair of equal neighbours.
pub fn min_frames(target: &[u32]) -> usize {
    target.len() + target.windows(2).filter(|w| w[0] == w[1]).count()
}

/// Per-sequence negative log-likelihood and, optionally, its gradient with
/// respect to the `(T, C)` log-probabilities of that sequence.
fn ctc_single(
    lp: &[f64],
    classes: usize,
    frames: usize,
    target: &[u32],
    blank: u32,
    grad: bool,
) -> (f64, Option<Vec<f64>>) {
    let s_len = 2 * target.len() + 1;
    let label = |s: usize| {
        if s.is_multiple_of(2) {
            blank
        } else {
            target[s / 2]
        }
    };
    let at = |t: usize, c: u32| lp[t * classes + c as usize];
    let skip_ok = |s: usize| s >= 2 && s % 2 == 1 && label(s) != label(s - 2);

    let mut alpha = vec![f64::NEG_INFINITY; frames * s_len];
    alpha[0] = at(0, blank);
    if s_len > 1 {
        alpha[1] = at(0, label(1));
    }
    for t in 1..frames {
        for s in 0..s_len {
            let mut v = alpha[(t - 1) * s_len + s];
            if s >= 1 {
                v = log_add(v, alpha[(t - 1) * s_len + s - 1]);
            }
            if skip_ok(s) {
                v = log_add(v, alpha[(t - 1) * s_len + s - 2]);
            }
            alpha[t * s_len + s] = v + at(t, label(s));
        }
    }
    let last = (frames - 1) * s_len;
    let mut log_p = alpha[last + s_len - 1];
    if s_len > 1 {
        log_p = log_add(log_p, alpha[last + s_len - 2]);
    }
    if !grad {
        return (-log_p, None);
    }

    let mut beta = vec![f64::NEG_INFINITY; frames * s_len];
    beta[last + s_len - 1] = at(frames - 1, label(s_len - 1));
    if s_len > 1 {
        beta[last + s_len - 2] = at(frames - 1, label(s_len - 2));
    }
    for t in (0..frames - 1).rev() {
        for s in 0..s_len {
            let mut v = beta[(t + 1) * s_len + s];
            if s + 1 < s_len {
                v = log_add(v, beta[(t + 1) * s_len + s + 1]);
            }
            if s + 2 < s_len && skip_ok(s + 2) {
                v = log_add(v, beta[(t + 1) * s_len + s + 2]);
            }
            beta[t * s_len + s] = v + at(t, label(s));
        }
    }
    // alpha and beta both include frame t's emission, so
    // d(-ln p)/d lp[t, c] = -exp(logsumexp_{s: label(s)=c}(alpha + beta) - lp[t, c] - ln p).
    let mut g = vec![0.0; frames * classes];
    for t in 0..frames {
        let mut acc = vec![f64::NEG_INFINITY; classes];
        for s in 0..s_len {
            let c = label(s) as usize;
            acc[c] = log_add(acc[c], alpha[t * s_len + s] + beta[t * s_len + s]);
        }
        for c in 0..classes {
            if acc[c] > f64::NEG_INFINITY {
                g[t * classes + c] = -(acc[c] - lp[t * classes + c] - log_p).exp();
            }
        }
    }
    (-log_p, Some(g))
}

struct CtcOp {
    targets: Vec<Vec<u32>>,
    input_lengths: Vec<usize>,
    blank: u32,
}

impl CtcOp {
    fn run(&self, data: &[f64], dims: (usize, usize, usize), grad: bool) -> (Vec<f64>, Vec<f64>) {
        let (t_max, b, c) = dims;
        let mut losses = Vec::with_capacity(b);
        let mut grads = if grad {
            vec![0.0; t_max * b * c]
        } else {
            Vec::new()
        };
        for i in 0..b {
            let frames = self.input_lengths[i];
            let mut seq = Vec::with_capacity(frames * c);
            for t in 0..frames {
                let off = (t * b + i) * c;
                seq.extend_from_slice(&data[off..off + c]);
            }
            let (loss, g) = ctc_single(&seq, c, frames, &self.targets[i], self.blank, grad);
            losses.push(loss);
            if let Some(g) = g {
                for t in 0..frames {
                    let off = (t * b + i) * c;
                    grads[off..off + c].copy_from_slice(&g[t * c..(t + 1) * c]);
                }
            }
        }
        (losses, grads)
    }
}

fn host_values(storage: &CpuStorage, layout: &Layout) -> candle_core::Result<Vec<f64>> {
    let (start, end) = layout
        .contiguous_offsets()
        .ok_or_else(|| candle_core::Error::Msg("ctc input must be contiguous".into()))?;
    Ok(match storage {
        CpuStorage::F32(v) => v[start..end].iter().map(|&x| x as f64).collect(),
        CpuStorage::F64(v) => v[start..end].to_vec(),
        _ => candle_core::bail!("ctc supports f32 and f64 only"),
    })
}

impl CustomOp1 for CtcOp {
    fn name(&self) -> &'static str {
        "ctc-loss"
    }

    fn cpu_fwd(
        &self,
        storage: &CpuStorage,
        layout: &Layout,
    ) -> candle_core::Result<(CpuStorage, Shape)> {
        let dims = layout.shape().dims3()?;
        let data = host_values(storage, layout)?;
        let (losses, _) = self.run(&data, dims, false);
        let out = match storage {
            CpuStorage::F32(_) => CpuStorage::F32(losses.iter().map(|&v| v as f32).collect()),
            _ => CpuStorage::F64(losses),
        };
        Ok((out, Shape::from(dims.1)))
    }

    fn bwd(
        &self,
        arg: &Tensor,
        _res: &Tensor,
        grad_res: &Tensor,
    ) -> candle_core::Result<Option<Tensor>> {
        let dims = arg.dims3()?;
        let data: Vec<f64> = arg
            .detach()
            .to_dtype(candle_core::DType::F64)?
            .flatten_all()?
            .to_vec1()?;
        let (_, grads) = self.run(&data, dims, true);
        let g = Tensor::from_vec(grads, dims, arg.device())?.to_dtype(arg.dtype())?;
        let scale = grad_res.reshape((1, dims.1, 1))?;
        Ok(Some(g.broadcast_mul(&scale)?))
    }
}

/// Per-item CTC negative log-likelihood `(B,)` of `(T, B, C)` log-probabilities.
pub fn ctc_loss_per_item(
    log_probs: &Tensor,
    targets: &[Vec<u32>],
    input_lengths: &[usize],
    blank: u32,
) -> Result<Tensor> {
    let (t_max, b, c) = log_probs.dims3()?;
    if targets.len() != b || input_lengths.len() != b {
        return Err(Error::Shape(format!(
            "ctc batch of {b} with {} targets and {} lengths",
            targets.len(),
            input_lengths.len()
        )));
    }
    for (i, (target, &frames)) in targets.iter().zip(input_lengths).enumerate() {
        if frames == 0 || frames > t_max {
            return Err(Error::InvalidArgument(format!(
                "item {i}: input length {frames} outside 1..={t_max}"
            )));
        }
        if let Some(&bad) = target.iter().find(|&&id| id as usize >= c || id == blank) {
            return Err(Error::InvalidArgument(format!(
                "item {i}: target id {bad} is blank or out of range"
            )));
        }
        let need = min_frames(target);
        if need > frames {
            return Err(Error::InvalidArgument(format!(
                "item {i}: target needs {need} frames but only {frames} are available"
            )));
        }
    }
    let op = CtcOp {
        targets: targets.to_vec(),
        input_lengths: input_lengths.to_vec(),
        blank,
    };
    Ok(log_probs.contiguous()?.apply_op1(op)?)
}

/// Batch mean of [`ctc_loss_per_item`].
pub fn ctc_loss(
    log_probs: &Tensor,
    targets: &[Vec<u32>],
    input_lengths: &[usize],
    blank: u32,
) -> Result<Tensor> {
    Ok(ctc_loss_per_item(log_probs, targets, input_lengths, blank)?.mean_all()?)
}

/// Best-path decoding: per-frame argmax, merge repeats, drop blanks.
pub fn greedy_decode(
    log_probs: &Tensor,
    input_lengths: &[usize],
    blank: u32,
) -> Result<Vec<Vec<u32>>> {
    let (_, b, _) = log_probs.dims3()?;
    let best: Vec<Vec<u32>> = log_probs.argmax(2)?.to_vec2()?;
    Ok((0..b)
        .map(|i| {
            let mut out = Vec::new();
            let mut prev = None;
            for row in best.iter().take(input_lengths[i]) {
                let id = row[i];
                if Some(id) != prev && id != blank {
                    out.push(id);
                }
                prev = Some(id);
            }
            out
        })
        .collect())
}
