use std::collections::HashMap;

use candle_core::backprop::GradStore;
use candle_core::Tensor;
use serde::{Deserialize, Serialize};

use super::params::ParamStore;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            lr: 5e-5,
            beta1: 0.0,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// Serializable optimizer moments.
pub struct AdamState {
    pub step: u64,
    pub m: Vec<Tensor>,
    pub v: Vec<Tensor>,
}

/// Adam with bias correction. Moments are kept aligned with the
/// [`ParamStore`] entry order; parameters absent from a gradient store are
/// skipped for that step.
pub struct Adam {
    config: AdamConfig,
    state: AdamState,
}

impl Adam {
    pub fn new(config: AdamConfig, store: &ParamStore) -> Result<Self> {
        if !(config.lr > 0.0) {
            return Err(Error::Config(format!(
                "learning rate must be positive, got {}",
                config.lr
            )));
        }
        let zeros = || {
            store
                .iter()
                .map(|(_, v)| Ok(v.as_tensor().zeros_like()?))
                .collect::<Result<Vec<_>>>()
        };
        Ok(Self {
            config,
            state: AdamState {
                step: 0,
                m: zeros()?,
                v: zeros()?,
            },
        })
    }

    pub fn config(&self) -> &AdamConfig {
        &self.config
    }

    pub fn steps(&self) -> u64 {
        self.state.step
    }

    pub fn state(&self) -> &AdamState {
        &self.state
    }

    /// Global L2 norm of the gradients present for `store`.
    pub fn grad_norm(store: &ParamStore, grads: &GradStore) -> Result<f64> {
        let mut sq = 0.0;
        for (_, var) in store.iter() {
            if let Some(g) = grads.get(var.as_tensor()) {
                sq += g
                    .sqr()?
                    .sum_all()?
                    .to_dtype(candle_core::DType::F64)?
                    .to_scalar::<f64>()?;
            }
        }
        Ok(sq.sqrt())
    }

    pub fn step(&mut self, store: &ParamStore, grads: &GradStore, clip: Option<f64>) -> Result<()> {
        let scale = match clip {
            Some(max) => {
                let norm = Self::grad_norm(store, grads)?;
                if norm > max {
                    max / norm
                } else {
                    1.0
                }
            }
            None => 1.0,
        };
        self.state.step += 1;
        let t = self.state.step as i32;
        let AdamConfig {
            lr,
            beta1,
            beta2,
            eps,
        } = self.config;
        let bc1 = 1.0 - beta1.powi(t);
        let bc2 = 1.0 - beta2.powi(t);
        for (i, (_, var)) in store.iter().enumerate() {
            let Some(g) = grads.get(var.as_tensor()) else {
                continue;
            };
            let g = (g.detach() * scale)?;
            let m = ((&self.state.m[i] * beta1)? + (&g * (1.0 - beta1))?)?;
            let v = ((&self.state.v[i] * beta2)? + (g.sqr()? * (1.0 - beta2))?)?;
            let m_hat = (&m / bc1)?;
            let v_hat = (&v / bc2)?;
            let update = (m_hat / (v_hat.sqrt()? + eps)?)?;
            let next = (var.as_tensor().detach() - (update * lr)?)?;
            var.set(&next)?;
            self.state.m[i] = m;
            self.state.v[i] = v;
        }
        Ok(())
    }

    pub fn export(&self, store: &ParamStore, prefix: &str) -> Vec<(String, Tensor)> {
        let mut out = Vec::with_capacity(2 * store.len());
        for (i, (name, _)) in store.iter().enumerate() {
            out.push((format!("{prefix}m.{name}"), self.state.m[i].clone()));
            out.push((format!("{prefix}v.{name}"), self.state.v[i].clone()));
        }
        out
    }

    pub fn import(
        &mut self,
        store: &ParamStore,
        tensors: &HashMap<String, Tensor>,
        prefix: &str,
        step: u64,
    ) -> Result<()> {
        for (i, (name, var)) in store.iter().enumerate() {
            for (slot, kind) in [(&mut self.state.m[i], "m"), (&mut self.state.v[i], "v")] {
                let key = format!("{prefix}{kind}.{name}");
                let t = tensors
                    .get(&key)
                    .ok_or_else(|| Error::Checkpoint(format!("missing entry {key}")))?;
                if t.dims() != var.dims() {
                    return Err(Error::Checkpoint(format!("entry {key} has wrong shape")));
                }
                *slot = t.to_dtype(store.dtype())?;
            }
        }
        self.state.step = step;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::Init;
    use candle_core::DType;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn first_step_moves_by_lr_against_gradient_sign() {
        let mut store = ParamStore::new(DType::F64);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let w = store
            .builder(&mut rng)
            .param("w", &[3], Init::Uniform(1.0))
            .unwrap();
        let before: Vec<f64> = w.to_vec1().unwrap();
        let mut opt = Adam::new(
            AdamConfig {
                lr: 0.01,
                ..Default::default()
            },
            &store,
        )
        .unwrap();
        // d/dw sum(w^2) = 2w, and a bias-corrected first Adam step is lr * sign(g).
        let loss = w.sqr().unwrap().sum_all().unwrap();
        opt.step(&store, &loss.backward().unwrap(), None).unwrap();
        let after: Vec<f64> = store.get("w").unwrap().to_vec1().unwrap();
        for (b, a) in before.iter().zip(&after) {
            assert!((b - a - 0.01 * b.signum()).abs() < 1e-6);
        }
        assert_eq!(opt.steps(), 1);
        assert_eq!(opt.config().beta1, 0.0);
    }
}
