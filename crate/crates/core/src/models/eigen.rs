//! Covariance spectrum summaries.

use alloc::vec::Vec;

use nalgebra::DMatrix;

use crate::error::{bail, Error, Result};
use crate::linalg::{max_asymmetry, sym_eigen_desc};

#[derive(Debug, Clone, PartialEq)]
pub struct EigenSummary {
    /// Descending, clipped at zero.
    pub eigenvalues: Vec<f64>,
    /// Smallest `k` whose leading eigenvalues reach the threshold fraction.
    pub leading_count: usize,
    /// Unit eigenvectors for the leading eigenvalues.
    pub leading_vectors: Vec<Vec<f64>>,
}

pub fn eigen_summary(cov: &DMatrix<f64>, threshold: f64) -> Result<EigenSummary> {
    if !cov.is_square() || cov.nrows() == 0 {
        bail!(DimensionMismatch, "covariance must be square and non-empty, got {}x{}", cov.nrows(), cov.ncols());
    }
    if !(threshold > 0.0 && threshold <= 1.0) {
        bail!(InvalidArgument, "threshold must lie in (0, 1], got {threshold}");
    }
    let scale = cov.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(f64::MIN_POSITIVE);
    let asym = max_asymmetry(cov);
    if asym > 1e-9 * scale {
        return Err(Error::NotSymmetric(asym));
    }
    let (values, vectors) = sym_eigen_desc(cov);
    let eigenvalues: Vec<f64> = values.into_iter().map(|v| v.max(0.0)).collect();
    let total: f64 = eigenvalues.iter().sum();
    let goal = threshold * total * (1.0 - 1e-12);
    let mut acc = 0.0;
    let mut leading_count = eigenvalues.len();
    for (i, v) in eigenvalues.iter().enumerate() {
        acc += v;
        if acc >= goal {
            leading_count = i + 1;
            break;
        }
    }
    let leading_vectors = (0..leading_count).map(|j| vectors.column(j).iter().copied().collect()).collect();
    Ok(EigenSummary { eigenvalues, leading_count, leading_vectors })
}
