//! Maximum-likelihood fitting of the baseline families.

use alloc::vec;

use nalgebra::DMatrix;

use super::{BaselineModel, DensityModel, Family};
use crate::ais::{ais_log_z, moment_match_sigma, AisConfig, AisEstimate, Energy};
use crate::error::{bail, Result};
use crate::linalg::{chol_logdet, cholesky, lower_inverse, lower_mul, lower_t_mul, sym_eigen_desc, SparseOp};
use crate::math::{exp, ln, PI};
use crate::patches::PatchSet;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitConfig {
    /// AIS settings for the stored normalizer of GCL1/CSAD.
    pub ais: AisConfig,
    /// Cheaper AIS settings used while searching over `λ/ε`.
    pub search: AisConfig,
    /// Points of the initial log-spaced `λ/ε` grid.
    pub grid_points: usize,
    /// The grid spans `[c/span, c·span]` around the data-driven centre `c`.
    pub grid_span: f64,
    /// Golden-section evaluations refining the best grid cell.
    pub golden_iters: usize,
    /// Draws used to match the AIS base scale.
    pub moment_samples: usize,
}

impl Default for FitConfig {
    fn default() -> Self {
        FitConfig {
            ais: AisConfig::default(),
            search: AisConfig { n_chains: 64, n_temps: 200, ..AisConfig::default() },
            grid_points: 7,
            grid_span: 1000.0,
            golden_iters: 12,
            moment_samples: 256,
        }
    }
}

impl FitConfig {
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.ais.seed = seed;
        self.search.seed = seed.wrapping_add(1);
        self
    }
}

/// Fit a baseline family. GMMs are trained with [`crate::gmm::fit`].
pub fn fit(family: Family, train: &PatchSet, config: &FitConfig) -> Result<DensityModel> {
    fit_baseline(family, train, config).map(DensityModel::Baseline)
}

pub fn fit_baseline(family: Family, train: &PatchSet, config: &FitConfig) -> Result<BaselineModel> {
    if train.is_empty() {
        bail!(InvalidArgument, "cannot fit {family} on an empty patch set");
    }
    let p = train.patch_size();
    let n = train.dim() as f64;
    let mean_sq = train.mean_of(|v| v * v);
    let mean_abs = train.mean_of(f64::abs);
    if mean_sq == 0.0 {
        bail!(FitFailure, "{family}: all training values are zero, the scale is unbounded");
    }
    match family {
        Family::Bcl2 => BaselineModel::bcl2(p, 1.0 / (2.0 * mean_sq)),
        Family::Bcl1 => BaselineModel::bcl1(p, 1.0 / mean_abs),
        Family::Gcl2 => {
            let op = super::operators::gradient_operator(p);
            let a = train.iter().map(|d| op.sq_of_product(d)).sum::<f64>() / train.len() as f64;
            let s = mean_sq * n;
            if a == 0.0 {
                bail!(FitFailure, "GCL2: training patches are all constant, lambda is unbounded");
            }
            let (lambda, epsilon) = fit_gcl2_params(&op, a, s);
            BaselineModel::gcl2(p, lambda, epsilon)
        }
        Family::Gcl1 | Family::Csad => {
            let op = if family == Family::Csad {
                super::operators::centralized_operator(p)
            } else {
                super::operators::gradient_operator(p)
            };
            let a = train.iter().map(|d| op.l1_of_product(d)).sum::<f64>() / train.len() as f64;
            let s = mean_abs * n;
            if a == 0.0 {
                bail!(FitFailure, "{family}: training patches are all constant, lambda is unbounded");
            }
            let (lambda, epsilon, est) = fit_l1_params(&op, a, s, config)?;
            Ok(BaselineModel::new(family, p, lambda, epsilon)?.with_log_z(est))
        }
        Family::Gmm => bail!(InvalidArgument, "use gmm::fit for mixtures"),
    }
}

/// Maximizer of `f` on `[lo, hi]` for unimodal `f`, using `iters` evaluations
/// after the first two.
pub(crate) fn golden_max(mut f: impl FnMut(f64) -> f64, mut lo: f64, mut hi: f64, iters: usize) -> (f64, f64) {
    let g = 0.5 * (libm::sqrt(5.0) - 1.0);
    let mut x1 = hi - g * (hi - lo);
    let mut x2 = lo + g * (hi - lo);
    let mut f1 = f(x1);
    let mut f2 = f(x2);
    for _ in 0..iters {
        if f1 >= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - g * (hi - lo);
            f1 = f(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + g * (hi - lo);
            f2 = f(x2);
        }
    }
    if f1 >= f2 {
        (x1, f1)
    } else {
        (x2, f2)
    }
}

/// Mean GCL2 log-likelihood as a function of (λ, ε), given
/// `a = mean ‖Ad‖²`, `s = mean ‖d‖²` and the eigenvalues `mu` of AᵀA.
pub(crate) fn gcl2_mean_ll(lambda: f64, epsilon: f64, a: f64, s: f64, mu: &[f64]) -> f64 {
    let n = mu.len() as f64;
    let logdet: f64 = mu.iter().map(|&m| ln(lambda * m.max(0.0) + epsilon)).sum();
    -lambda * a - epsilon * s + 0.5 * logdet - 0.5 * n * ln(PI)
}

fn fit_gcl2_params(op: &SparseOp, a: f64, s: f64) -> (f64, f64) {
    let (mu, _) = sym_eigen_desc(&op.gram());
    let n = mu.len() as f64;
    let rank = mu.iter().filter(|&&m| m > 1e-9).count().max(1) as f64;
    let mut ll = ln(rank / (2.0 * a));
    let mut le = ln(n / (2.0 * s));
    let obj = |ll: f64, le: f64| gcl2_mean_ll(exp(ll), exp(le), a, s, &mu);
    let mut best = obj(ll, le);
    for _ in 0..400 {
        let (nl, _) = golden_max(|t| obj(t, le), ll - 4.0, ll + 4.0, 90);
        let (ne, f) = golden_max(|t| obj(nl, t), le - 4.0, le + 4.0, 90);
        let moved = (nl - ll).abs().max((ne - le).abs());
        ll = nl;
        le = ne;
        let improved = f - best;
        best = best.max(f);
        if moved < 1e-10 || (improved.abs() < 1e-14 * best.abs().max(1.0) && moved < 1e-6) {
            break;
        }
    }
    (exp(ll), exp(le))
}

/// `exp(-ρ‖Ay‖₁ - ‖y‖₁)` in whitened coordinates `y = L⁻ᵀz`, where
/// `LLᵀ = ½(ρ²AᵀA + I)` is the precision of a Gaussian surrogate.
pub struct WhitenedL1<'a> {
    op: &'a SparseOp,
    rho: f64,
    linv: DMatrix<f64>,
    log_det_l: f64,
}

impl<'a> WhitenedL1<'a> {
    pub fn new(op: &'a SparseOp, rho: f64) -> Result<Self> {
        let n = op.ncols();
        let prec = (op.gram() * (rho * rho) + DMatrix::identity(n, n)) * 0.5;
        let chol = cholesky(prec)?;
        let log_det_l = 0.5 * chol_logdet(&chol);
        let linv = lower_inverse(&chol.l());
        Ok(WhitenedL1 { op, rho, linv, log_det_l })
    }

    /// `log Z` of the unwhitened density equals the whitened `log Z` plus this.
    pub fn log_jacobian(&self) -> f64 {
        -self.log_det_l
    }

    /// Map whitened coordinates back: `y = L⁻ᵀ z`.
    pub fn unwhiten(&self, z: &[f64], y: &mut [f64]) {
        lower_t_mul(&self.linv, z, y);
    }
}

impl Energy for WhitenedL1<'_> {
    fn dim(&self) -> usize {
        self.op.ncols()
    }

    fn energy(&self, z: &[f64]) -> f64 {
        let mut y = vec![0.0; z.len()];
        self.unwhiten(z, &mut y);
        self.rho * self.op.l1_of_product(&y) + y.iter().map(|v| v.abs()).sum::<f64>()
    }

    fn energy_grad(&self, z: &[f64], grad: &mut [f64]) -> f64 {
        let n = z.len();
        let mut y = vec![0.0; n];
        self.unwhiten(z, &mut y);
        let mut gy = vec![0.0; n];
        let mut e = self.rho * self.op.add_sign_gradient(&y, self.rho, &mut gy);
        for i in 0..n {
            e += y[i].abs();
            gy[i] += crate::math::sign(y[i]);
        }
        lower_mul(&self.linv, &gy, grad);
        e
    }
}

/// AIS estimate of `log ∫ exp(-ρ‖Ay‖₁ - ‖y‖₁) dy`.
pub(crate) fn log_z_unit(op: &SparseOp, rho: f64, ais: &AisConfig, moment_samples: usize) -> Result<AisEstimate> {
    let target = WhitenedL1::new(op, rho)?;
    let sigma0 = moment_match_sigma(&target, 1.0, moment_samples, ais.seed ^ 0x5eed);
    let mut est = ais_log_z(&target, sigma0, ais)?;
    est.log_z += target.log_jacobian();
    Ok(est)
}

/// Profile likelihood over ρ = λ/ε. With `a = mean ‖Ad‖₁`, `s = mean ‖d‖₁`,
/// the normalizer factorizes as `log Z(λ, ε) = -n ln ε + log Z₁(λ/ε)`, so the
/// best ε for fixed ρ is `n/(ρa + s)`.
fn fit_l1_params(op: &SparseOp, a: f64, s: f64, config: &FitConfig) -> Result<(f64, f64, AisEstimate)> {
    let n = op.ncols() as f64;
    let profile = |log_rho: f64, ais: &AisConfig| -> Result<(f64, AisEstimate)> {
        let rho = exp(log_rho);
        let est = log_z_unit(op, rho, ais, config.moment_samples)?;
        let ll = -n + n * ln(n / (rho * a + s)) - est.log_z;
        Ok((ll, est))
    };
    let centre = ln(s / a);
    let half = ln(config.grid_span);
    let k = config.grid_points.max(2);
    let grid: alloc::vec::Vec<f64> = (0..k).map(|i| centre - half + 2.0 * half * i as f64 / (k - 1) as f64).collect();
    let mut values = alloc::vec::Vec::with_capacity(k);
    for &g in &grid {
        values.push(profile(g, &config.search)?.0);
    }
    let best = (0..k).max_by(|&i, &j| values[i].total_cmp(&values[j])).unwrap();
    let lo = grid[best.saturating_sub(1)];
    let hi = grid[(best + 1).min(k - 1)];
    let mut err = None;
    let (mut log_rho, f) = golden_max(
        |t| match profile(t, &config.search) {
            Ok((v, _)) => v,
            Err(e) => {
                err.get_or_insert(e);
                f64::NEG_INFINITY
            }
        },
        lo,
        hi,
        config.golden_iters,
    );
    if let Some(e) = err {
        return Err(e);
    }
    if values[best] > f {
        log_rho = grid[best];
    }
    let rho = exp(log_rho);
    let epsilon = n / (rho * a + s);
    let lambda = rho * epsilon;
    let (_, mut est) = profile(log_rho, &config.ais)?;
    est.log_z -= n * ln(epsilon);
    Ok((lambda, epsilon, est))
}
