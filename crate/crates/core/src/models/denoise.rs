//! Patch MAP denoisers: `argmin_x ‖x - y‖²/(2σ²) + E(x)`.

use alloc::vec;

use nalgebra::{DMatrix, DMatrixView, DMatrixViewMut};

use super::{BaselineModel, Family};
use crate::error::{bail, Result};
use crate::gmm::GmmDenoiser;
use crate::linalg::SparseOp;

/// Number of ADMM iterations for the L1 transform models.
pub const ADMM_ITERS: usize = 10;

pub enum Denoiser<'a> {
    /// `x = c·y`
    Shrink(f64),
    /// Elementwise soft threshold.
    SoftThreshold(f64),
    /// `x = K y` with a dense gain matrix.
    Linear(DMatrix<f64>),
    L1(L1Prox<'a>),
    Gmm(GmmDenoiser<'a>),
}

/// ADMM for `‖x - y‖²/(2σ²) + λ‖Ax‖₁ + ε‖x‖₁`, splitting `z = [A; I] x`
/// with penalty `1/σ²` so the x-update matrix `(2I + AᵀA)⁻¹` is fixed.
pub struct L1Prox<'a> {
    op: &'a SparseOp,
    gain: DMatrix<f64>,
    thresh_a: f64,
    thresh_i: f64,
}

impl<'a> L1Prox<'a> {
    pub fn new(op: &'a SparseOp, lambda: f64, epsilon: f64, noise_var: f64) -> Result<Self> {
        let n = op.ncols();
        let m = op.gram() + DMatrix::identity(n, n) * 2.0;
        let gain = m
            .try_inverse()
            .ok_or_else(|| crate::Error::Numerical("ADMM system is singular".into()))?;
        Ok(L1Prox { op, gain, thresh_a: lambda * noise_var, thresh_i: epsilon * noise_var })
    }

    pub fn denoise(&self, y: &[f64], out: &mut [f64]) {
        let n = y.len();
        let m = self.op.nrows();
        let mut za = vec![0.0; m];
        self.op.apply(y, &mut za);
        let mut zi = y.to_vec();
        let mut ua = vec![0.0; m];
        let mut ui = vec![0.0; n];
        let mut rhs = vec![0.0; n];
        let mut ax = vec![0.0; m];
        let soft = |v: f64, t: f64| if v > t { v - t } else if v < -t { v + t } else { 0.0 };
        for _ in 0..ADMM_ITERS {
            for i in 0..m {
                ax[i] = za[i] - ua[i];
            }
            self.op.apply_transpose(&ax, &mut rhs);
            for i in 0..n {
                rhs[i] += y[i] + zi[i] - ui[i];
            }
            for (i, o) in out.iter_mut().enumerate().take(n) {
                *o = self.gain.row(i).iter().zip(&rhs).map(|(g, r)| g * r).sum();
            }
            self.op.apply(out, &mut ax);
            for i in 0..m {
                let v = ax[i] + ua[i];
                za[i] = soft(v, self.thresh_a);
                ua[i] = v - za[i];
            }
            for i in 0..n {
                let v = out[i] + ui[i];
                zi[i] = soft(v, self.thresh_i);
                ui[i] = v - zi[i];
            }
        }
    }
}

impl Denoiser<'_> {
    pub fn dim(&self) -> Option<usize> {
        match self {
            Denoiser::Linear(k) => Some(k.nrows()),
            Denoiser::L1(p) => Some(p.op.ncols()),
            Denoiser::Gmm(g) => Some(g.dim()),
            _ => None,
        }
    }

    pub fn denoise(&self, y: &[f64], out: &mut [f64]) {
        self.denoise_batch(y, out);
    }

    /// Denoise a contiguous block of patches into `out` (same layout).
    pub fn denoise_batch(&self, ys: &[f64], out: &mut [f64]) {
        assert_eq!(ys.len(), out.len());
        match self {
            Denoiser::Shrink(c) => {
                for (o, &y) in out.iter_mut().zip(ys) {
                    *o = c * y;
                }
            }
            Denoiser::SoftThreshold(t) => {
                for (o, &y) in out.iter_mut().zip(ys) {
                    *o = if y > *t {
                        y - t
                    } else if y < -t {
                        y + t
                    } else {
                        0.0
                    };
                }
            }
            Denoiser::Linear(k) => {
                let n = k.nrows();
                let b = ys.len() / n;
                let x = DMatrixView::from_slice(ys, n, b);
                let mut o = DMatrixViewMut::from_slice(out, n, b);
                o.gemm(1.0, k, &x, 0.0);
            }
            Denoiser::L1(p) => {
                let n = p.op.ncols();
                for (y, o) in ys.chunks_exact(n).zip(out.chunks_exact_mut(n)) {
                    p.denoise(y, o);
                }
            }
            Denoiser::Gmm(g) => g.denoise_batch(ys, out, None),
        }
    }
}

impl BaselineModel {
    pub fn denoiser(&self, noise_var: f64) -> Result<Denoiser<'_>> {
        if !(noise_var > 0.0 && noise_var.is_finite()) {
            bail!(InvalidArgument, "noise variance must be positive, got {noise_var}");
        }
        let l = self.lambda();
        Ok(match self.family() {
            Family::Bcl2 => Denoiser::Shrink(1.0 / (1.0 + 2.0 * l * noise_var)),
            Family::Bcl1 => Denoiser::SoftThreshold(l * noise_var),
            Family::Gcl2 => {
                let n = self.dim();
                let op = self.operator().unwrap();
                let m = op.gram() * l + DMatrix::identity(n, n) * self.epsilon();
                let sys = DMatrix::identity(n, n) + m * (2.0 * noise_var);
                let k = sys
                    .try_inverse()
                    .ok_or_else(|| crate::Error::Numerical("GCL2 denoiser system is singular".into()))?;
                Denoiser::Linear(k)
            }
            Family::Gcl1 | Family::Csad => {
                Denoiser::L1(L1Prox::new(self.operator().unwrap(), l, self.epsilon(), noise_var)?)
            }
            Family::Gmm => unreachable!(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec::Vec;

    fn objective(m: &BaselineModel, y: &[f64], x: &[f64], var: f64) -> f64 {
        let fid: f64 = x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() / (2.0 * var);
        fid + m.energy(x)
    }

    #[test]
    fn closed_forms() {
        let m = BaselineModel::bcl2(2, 1.5).unwrap();
        let d = m.denoiser(0.5).unwrap();
        let mut out = [0.0; 4];
        d.denoise(&[1.0, -2.0, 0.5, 0.0], &mut out);
        assert_eq!(out, [0.4, -0.8, 0.2, 0.0]);
        let m = BaselineModel::bcl1(2, 2.0).unwrap();
        m.denoiser(0.25).unwrap().denoise(&[1.0, -2.0, 0.3, 0.0], &mut out);
        assert_eq!(out, [0.5, -1.5, 0.0, 0.0]);
    }

    #[test]
    fn gcl2_is_stationary() {
        let m = BaselineModel::gcl2(3, 2.0, 0.3).unwrap();
        let y: Vec<f64> = (0..9).map(|i| libm::cos(i as f64 * 1.7)).collect();
        let mut x = [0.0; 9];
        m.denoiser(0.1).unwrap().denoise(&y, &mut x);
        let base = objective(&m, &y, &x, 0.1);
        for i in 0..9 {
            for s in [-1e-4, 1e-4] {
                let mut xp = x;
                xp[i] += s;
                assert!(objective(&m, &y, &xp, 0.1) >= base - 1e-12);
            }
        }
    }

    #[test]
    fn l1_prox_reduces_objective() {
        for fam in [Family::Gcl1, Family::Csad] {
            let m = BaselineModel::new(fam, 3, 4.0, 0.5).unwrap();
            let y: Vec<f64> = (0..9).map(|i| 0.3 * libm::sin(i as f64 * 2.3)).collect();
            let mut x = [0.0; 9];
            m.denoiser(0.05).unwrap().denoise(&y, &mut x);
            assert!(objective(&m, &y, &x, 0.05) < objective(&m, &y, &y, 0.05));
        }
    }
}
