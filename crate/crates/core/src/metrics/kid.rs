use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct KidConfig {
    /// Clamped to the smaller set size.
    pub subset_size: usize,
    pub num_subsets: usize,
    pub seed: u64,
}

impl Default for KidConfig {
    fn default() -> Self {
        Self {
            subset_size: 100,
            num_subsets: 100,
            seed: 0,
        }
    }
}

/// `(x.y / d + 1)^3`.
pub fn polynomial_kernel(x: &[f64], y: &[f64]) -> f64 {
    let dot: f64 = x.iter().zip(y).map(|(a, b)| a * b).sum();
    (dot / x.len() as f64 + 1.0).powi(3)
}

/// MMD² U-statistic over paired samples of equal size: every sum skips
/// pairs with equal indices, so two copies of one sample score exactly 0.
pub fn mmd2_unbiased(x: &[Vec<f64>], y: &[Vec<f64>]) -> Result<f64> {
    let m = x.len();
    if m < 2 || y.len() != m {
        return Err(Error::InvalidArgument(format!(
            "paired samples of at least 2 are required, got {} and {}",
            m,
            y.len()
        )));
    }
    let (mut kxx, mut kyy, mut kxy) = (0.0, 0.0, 0.0);
    for i in 0..m {
        for j in 0..m {
            if i != j {
                kxx += polynomial_kernel(&x[i], &x[j]);
                kyy += polynomial_kernel(&y[i], &y[j]);
                kxy += polynomial_kernel(&x[i], &y[j]);
            }
        }
    }
    Ok((kxx + kyy - 2.0 * kxy) / (m * (m - 1)) as f64)
}

fn rows(m: &DMatrix<f64>, idx: &[usize]) -> Vec<Vec<f64>> {
    idx.iter()
        .map(|&i| m.row(i).iter().copied().collect())
        .collect()
}

fn subset(rng: &mut ChaCha8Rng, n: usize, k: usize) -> Vec<usize> {
    let mut idx = rand::seq::index::sample(rng, n, k).into_vec();
    idx.sort_unstable();
    idx
}

/// Mean MMD² over random subsets (raw, not rescaled).
pub fn kid(features_a: &DMatrix<f64>, features_b: &DMatrix<f64>, cfg: &KidConfig) -> Result<f64> {
    if features_a.ncols() != features_b.ncols() {
        return Err(Error::Shape(format!(
            "feature dimensions differ: {} vs {}",
            features_a.ncols(),
            features_b.ncols()
        )));
    }
    let size = cfg
        .subset_size
        .min(features_a.nrows())
        .min(features_b.nrows());
    if size < 2 {
        return Err(Error::InvalidArgument(format!(
            "subset size must be at least 2, got {size}"
        )));
    }
    if cfg.num_subsets == 0 {
        return Err(Error::InvalidArgument(
            "num_subsets must be positive".into(),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut total = 0.0;
    for _ in 0..cfg.num_subsets {
        let ia = subset(&mut rng, features_a.nrows(), size);
        let ib = subset(&mut rng, features_b.nrows(), size);
        total += mmd2_unbiased(&rows(features_a, &ia), &rows(features_b, &ib))?;
    }
    Ok(total / cfg.num_subsets as f64)
}
