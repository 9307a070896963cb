use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};

/// Mean and unbiased covariance of a feature set.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianStats {
    pub mean: DVector<f64>,
    pub cov: DMatrix<f64>,
}

impl GaussianStats {
    /// Statistics of the rows of `features (n, d)`.
    pub fn from_features(features: &DMatrix<f64>) -> Result<Self> {
        let (n, d) = features.shape();
        if n < 2 {
            return Err(Error::InvalidArgument(format!(
                "need at least 2 feature rows, got {n}"
            )));
        }
        if n <= d {
            log::warn!("{n} samples for {d}-dimensional features; covariance is singular");
        }
        let mean = features.row_mean().transpose();
        let mut centered = features.clone();
        for mut row in centered.row_iter_mut() {
            row -= mean.transpose();
        }
        let cov = centered.transpose() * &centered / (n - 1) as f64;
        Ok(Self { mean, cov })
    }
}

/// Square root of a symmetric positive semidefinite matrix. Eigenvalues
/// that rounding pushed below zero are clamped.
pub fn psd_sqrt(m: &DMatrix<f64>) -> DMatrix<f64> {
    let sym = (m + m.transpose()) * 0.5;
    let eig = SymmetricEigen::new(sym);
    let roots = eig.eigenvalues.map(|v| v.max(0.0).sqrt());
    &eig.eigenvectors * DMatrix::from_diagonal(&roots) * eig.eigenvectors.transpose()
}

/// Fréchet distance between two Gaussians. The cross term uses
/// `tr((A B)^{1/2}) = tr((A^{1/2} B A^{1/2})^{1/2})`, which stays symmetric.
pub fn frechet_distance(a: &GaussianStats, b: &GaussianStats) -> Result<f64> {
    if a.mean.len() != b.mean.len() {
        return Err(Error::Shape(format!(
            "feature dimensions differ: {} vs {}",
            a.mean.len(),
            b.mean.len()
        )));
    }
    let diff = (&a.mean - &b.mean).norm_squared();
    let ra = psd_sqrt(&a.cov);
    let inner = &ra * &b.cov * &ra;
    let inner = (&inner + inner.transpose()) * 0.5;
    let cross: f64 = SymmetricEigen::new(inner)
        .eigenvalues
        .iter()
        .map(|v| v.max(0.0).sqrt())
        .sum();
    let value = diff + a.cov.trace() + b.cov.trace() - 2.0 * cross;
    if !value.is_finite() {
        return Err(Error::NonFinite("Fréchet distance".into()));
    }
    Ok(value.max(0.0))
}

pub fn fid(features_a: &DMatrix<f64>, features_b: &DMatrix<f64>) -> Result<f64> {
    if features_a.ncols() != features_b.ncols() {
        return Err(Error::Shape(format!(
            "feature dimensions differ: {} vs {}",
            features_a.ncols(),
            features_b.ncols()
        )));
    }
    frechet_distance(
        &GaussianStats::from_features(features_a)?,
        &GaussianStats::from_features(features_b)?,
    )
}
