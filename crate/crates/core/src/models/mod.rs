//! Density models of warp-error patches.
//!
//! Every model is `log p(d) = -E(d) - log Z` over flattened `p × p` patches:
//!
//! | family | energy `E(d)` | `log Z` |
//! |--------|---------------|---------|
//! | BCL2 | `λ‖d‖²` | closed form |
//! | BCL1 | `λ‖d‖₁` | closed form |
//! | GCL2 | `λ‖Ad‖² + ε‖d‖²` | closed form |
//! | GCL1 | `λ‖Ad‖₁ + ε‖d‖₁` | AIS estimate |
//! | CSAD | `λ‖Cd‖₁ + ε‖d‖₁` | AIS estimate |
//!
//! `A` stacks in-patch forward differences and `C` all centred differences
//! over 5×5 neighbourhoods. Gaussian mixtures live in [`crate::gmm`] and are
//! wrapped by [`DensityModel`].

mod costs;
mod denoise;
mod eigen;
mod fit;
pub mod operators;
mod sample;

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use nalgebra::DMatrix;

pub use costs::{census_cost, csad_cost};
pub use denoise::{Denoiser, L1Prox};
pub use eigen::{eigen_summary, EigenSummary};
pub use fit::{fit, fit_baseline, FitConfig, WhitenedL1};
pub use sample::SampleConfig;

use crate::ais::AisEstimate;
use crate::error::{bail, Error, Result};
use crate::gmm::GmmModel;
use crate::linalg::{chol_logdet, cholesky, SparseOp};
use crate::math::{ln, PI};
use crate::patches::PatchSet;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Family {
    Bcl2,
    Bcl1,
    Gcl2,
    Gcl1,
    Csad,
    Gmm,
}

impl Family {
    pub const BASELINES: [Family; 5] = [Family::Bcl2, Family::Bcl1, Family::Gcl2, Family::Gcl1, Family::Csad];

    pub fn as_str(self) -> &'static str {
        match self {
            Family::Bcl2 => "BCL2",
            Family::Bcl1 => "BCL1",
            Family::Gcl2 => "GCL2",
            Family::Gcl1 => "GCL1",
            Family::Csad => "CSAD",
            Family::Gmm => "GMM",
        }
    }

    /// Case-insensitive.
    pub fn parse(s: &str) -> Result<Family> {
        let all = [Family::Bcl2, Family::Bcl1, Family::Gcl2, Family::Gcl1, Family::Csad, Family::Gmm];
        all.into_iter()
            .find(|f| f.as_str().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::InvalidArgument(format!("unknown model family '{s}'")))
    }

    /// Families with a transform matrix.
    pub fn has_operator(self) -> bool {
        matches!(self, Family::Gcl2 | Family::Gcl1 | Family::Csad)
    }

    /// Families whose normalizer comes from AIS.
    pub fn needs_ais(self) -> bool {
        matches!(self, Family::Gcl1 | Family::Csad)
    }

    pub fn is_l1(self) -> bool {
        matches!(self, Family::Bcl1 | Family::Gcl1 | Family::Csad)
    }
}

impl core::fmt::Display for Family {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One of the five constancy-based models.
#[derive(Debug, Clone, PartialEq)]
pub struct BaselineModel {
    family: Family,
    patch_size: usize,
    lambda: f64,
    epsilon: f64,
    operator: Option<SparseOp>,
    log_z: Option<f64>,
    ais: Option<AisEstimate>,
}

fn check_positive(name: &str, v: f64) -> Result<()> {
    if !(v > 0.0 && v.is_finite()) {
        bail!(InvalidArgument, "{name} must be positive and finite, got {v}");
    }
    Ok(())
}

impl BaselineModel {
    pub fn bcl2(patch_size: usize, lambda: f64) -> Result<Self> {
        Self::build(Family::Bcl2, patch_size, lambda, 0.0, None)
    }

    pub fn bcl1(patch_size: usize, lambda: f64) -> Result<Self> {
        Self::build(Family::Bcl1, patch_size, lambda, 0.0, None)
    }

    pub fn gcl2(patch_size: usize, lambda: f64, epsilon: f64) -> Result<Self> {
        Self::build(Family::Gcl2, patch_size, lambda, epsilon, None)
    }

    /// Unnormalized until a log normalizer is attached.
    pub fn gcl1(patch_size: usize, lambda: f64, epsilon: f64) -> Result<Self> {
        Self::build(Family::Gcl1, patch_size, lambda, epsilon, None)
    }

    /// Unnormalized until a log normalizer is attached.
    pub fn csad(patch_size: usize, lambda: f64, epsilon: f64) -> Result<Self> {
        Self::build(Family::Csad, patch_size, lambda, epsilon, None)
    }

    pub fn new(family: Family, patch_size: usize, lambda: f64, epsilon: f64) -> Result<Self> {
        Self::build(family, patch_size, lambda, epsilon, None)
    }

    /// Model with an explicit transform matrix (as stored in model files).
    pub fn with_matrix(family: Family, patch_size: usize, lambda: f64, epsilon: f64, a: &DMatrix<f64>) -> Result<Self> {
        if a.ncols() != patch_size * patch_size {
            bail!(DimensionMismatch, "transform has {} columns for dim {}", a.ncols(), patch_size * patch_size);
        }
        Self::build(family, patch_size, lambda, epsilon, Some(SparseOp::from_dense(a)))
    }

    fn build(family: Family, patch_size: usize, lambda: f64, epsilon: f64, op: Option<SparseOp>) -> Result<Self> {
        if family == Family::Gmm {
            bail!(InvalidArgument, "GMM is not a baseline family");
        }
        if patch_size == 0 {
            bail!(InvalidArgument, "patch size must be positive");
        }
        check_positive("lambda", lambda)?;
        let n = patch_size * patch_size;
        let operator = if family.has_operator() {
            check_positive("epsilon", epsilon)?;
            Some(op.unwrap_or_else(|| match family {
                Family::Csad => operators::centralized_operator(patch_size),
                _ => operators::gradient_operator(patch_size),
            }))
        } else {
            if epsilon != 0.0 {
                bail!(InvalidArgument, "{family} has no epsilon parameter");
            }
            None
        };
        let nf = n as f64;
        let log_z = match family {
            Family::Bcl2 => Some(-0.5 * nf * ln(lambda / PI)),
            Family::Bcl1 => Some(-nf * ln(lambda / 2.0)),
            Family::Gcl2 => {
                let op = operator.as_ref().unwrap();
                let m = op.gram() * lambda + DMatrix::identity(n, n) * epsilon;
                let chol = cholesky(m)?;
                Some(-0.5 * (chol_logdet(&chol) - nf * ln(PI)))
            }
            _ => None,
        };
        Ok(BaselineModel { family, patch_size, lambda, epsilon, operator, log_z, ais: None })
    }

    /// Attach an AIS estimate of `log Z` (GCL1 and CSAD).
    pub fn with_log_z(mut self, estimate: AisEstimate) -> Self {
        self.log_z = Some(estimate.log_z);
        self.ais = Some(estimate);
        self
    }

    pub fn family(&self) -> Family {
        self.family
    }

    pub fn patch_size(&self) -> usize {
        self.patch_size
    }

    pub fn dim(&self) -> usize {
        self.patch_size * self.patch_size
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn operator(&self) -> Option<&SparseOp> {
        self.operator.as_ref()
    }

    pub fn log_z(&self) -> Option<f64> {
        self.log_z
    }

    /// Standard error of `log Z` (zero for closed forms).
    pub fn log_z_stderr(&self) -> f64 {
        self.ais.as_ref().map_or(0.0, |a| a.stderr)
    }

    pub fn ais(&self) -> Option<&AisEstimate> {
        self.ais.as_ref()
    }

    /// `E(d)`, the negative unnormalized log density.
    pub fn energy(&self, d: &[f64]) -> f64 {
        let l2: fn(&[f64]) -> f64 = |d| d.iter().map(|v| v * v).sum();
        let l1: fn(&[f64]) -> f64 = |d| d.iter().map(|v| v.abs()).sum();
        match self.family {
            Family::Bcl2 => self.lambda * l2(d),
            Family::Bcl1 => self.lambda * l1(d),
            Family::Gcl2 => {
                let op = self.operator.as_ref().unwrap();
                self.lambda * op.sq_of_product(d) + self.epsilon * l2(d)
            }
            Family::Gcl1 | Family::Csad => {
                let op = self.operator.as_ref().unwrap();
                self.lambda * op.l1_of_product(d) + self.epsilon * l1(d)
            }
            Family::Gmm => unreachable!(),
        }
    }

    pub fn logpdf(&self, d: &[f64]) -> Result<f64> {
        if d.len() != self.dim() {
            bail!(DimensionMismatch, "patch has {} values, model dim is {}", d.len(), self.dim());
        }
        let log_z = self.log_z.ok_or(Error::Unfitted("log normalizer has not been estimated"))?;
        Ok(-self.energy(d) - log_z)
    }
}

/// Any patch density: a baseline or a Gaussian mixture.
#[derive(Debug, Clone, PartialEq)]
pub enum DensityModel {
    Baseline(BaselineModel),
    Gmm(GmmModel),
}

impl From<BaselineModel> for DensityModel {
    fn from(m: BaselineModel) -> Self {
        DensityModel::Baseline(m)
    }
}

impl From<GmmModel> for DensityModel {
    fn from(m: GmmModel) -> Self {
        DensityModel::Gmm(m)
    }
}

impl DensityModel {
    pub fn family(&self) -> Family {
        match self {
            DensityModel::Baseline(m) => m.family(),
            DensityModel::Gmm(_) => Family::Gmm,
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            DensityModel::Baseline(m) => m.dim(),
            DensityModel::Gmm(g) => g.dim(),
        }
    }

    /// Display name, e.g. `BCL2` or `GMM20`.
    pub fn name(&self) -> String {
        match self {
            DensityModel::Baseline(m) => String::from(m.family().as_str()),
            DensityModel::Gmm(g) => format!("GMM{}", g.k()),
        }
    }

    pub fn logpdf(&self, patch: &[f64]) -> Result<f64> {
        match self {
            DensityModel::Baseline(m) => m.logpdf(patch),
            DensityModel::Gmm(g) => g.logpdf(patch),
        }
    }

    /// Log densities of a contiguous block of patches.
    pub fn logpdf_batch(&self, patches: &[f64]) -> Result<Vec<f64>> {
        let d = self.dim();
        if patches.len() % d != 0 {
            bail!(DimensionMismatch, "{} values is not a whole number of {d}-dim patches", patches.len());
        }
        match self {
            DensityModel::Baseline(m) => patches.chunks_exact(d).map(|p| m.logpdf(p)).collect(),
            DensityModel::Gmm(g) => g.logpdf_batch(patches),
        }
    }

    pub fn log_likelihoods(&self, set: &PatchSet) -> Result<Vec<f64>> {
        if set.dim() != self.dim() {
            bail!(DimensionMismatch, "patches have dim {}, model {} has dim {}", set.dim(), self.name(), self.dim());
        }
        self.logpdf_batch(set.as_flat())
    }

    pub fn sample(&self, n: usize, seed: u64) -> Result<PatchSet> {
        self.sample_with(n, seed, &SampleConfig::default())
    }

    /// Draws with explicit HMC settings (used by GCL1 and CSAD only).
    pub fn sample_with(&self, n: usize, seed: u64, config: &SampleConfig) -> Result<PatchSet> {
        match self {
            DensityModel::Baseline(m) => m.sample(n, seed, config),
            DensityModel::Gmm(g) => g.sample(n, seed),
        }
    }

    /// Patch MAP denoiser for additive Gaussian noise of variance `noise_var`.
    pub fn denoiser(&self, noise_var: f64) -> Result<Denoiser<'_>> {
        match self {
            DensityModel::Baseline(m) => m.denoiser(noise_var),
            DensityModel::Gmm(g) => g.denoiser(noise_var).map(Denoiser::Gmm),
        }
    }
}
