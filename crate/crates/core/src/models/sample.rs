//! Drawing patches from the baseline models.

use alloc::vec;
use alloc::vec::Vec;

use nalgebra::DMatrix;
use rand::Rng as _;
use rand_distr::StandardNormal;

use super::{BaselineModel, Family, WhitenedL1};
use crate::ais::{moment_match_sigma, HmcChain};
use crate::error::{Error, Result};
use crate::linalg::{cholesky, lower_inverse, lower_t_mul};
use crate::math::{exp, ln, sqrt};
use crate::patches::{PatchSet, Split};
use crate::rng;

/// Long-run HMC settings for the L1 transform models.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SampleConfig {
    pub chains: usize,
    pub burn_in: usize,
    pub thin: usize,
    pub leapfrog_steps: usize,
}

impl Default for SampleConfig {
    fn default() -> Self {
        SampleConfig { chains: 16, burn_in: 1000, thin: 10, leapfrog_steps: 10 }
    }
}

impl BaselineModel {
    /// `n` independent draws (HMC chains for GCL1/CSAD), deterministic per seed.
    pub fn sample(&self, n: usize, seed: u64, config: &SampleConfig) -> Result<PatchSet> {
        let dim = self.dim();
        let mut data = Vec::with_capacity(n * dim);
        let mut rng = rng::seeded(seed);
        match self.family() {
            Family::Bcl2 => {
                let sd = sqrt(0.5 / self.lambda());
                for _ in 0..n * dim {
                    data.push(sd * rng.sample::<f64, _>(StandardNormal));
                }
            }
            Family::Bcl1 => {
                for _ in 0..n * dim {
                    let u: f64 = rng.random();
                    let mag = -ln(1.0 - u) / self.lambda();
                    data.push(if rng.random::<bool>() { mag } else { -mag });
                }
            }
            Family::Gcl2 => {
                let op = self.operator().unwrap();
                let prec = (op.gram() * self.lambda() + DMatrix::identity(dim, dim) * self.epsilon()) * 2.0;
                let linv = lower_inverse(&cholesky(prec)?.l());
                let mut z = vec![0.0; dim];
                let mut x = vec![0.0; dim];
                for _ in 0..n {
                    z.iter_mut().for_each(|v| *v = rng.sample(StandardNormal));
                    lower_t_mul(&linv, &z, &mut x);
                    data.extend_from_slice(&x);
                }
            }
            Family::Gcl1 | Family::Csad => {
                data = self.sample_hmc(n, seed, config)?;
            }
            Family::Gmm => unreachable!(),
        }
        PatchSet::from_flat(self.patch_size(), Split::Train, data)
    }

    fn sample_hmc(&self, n: usize, seed: u64, config: &SampleConfig) -> Result<Vec<f64>> {
        let dim = self.dim();
        let eps = self.epsilon();
        let target = WhitenedL1::new(self.operator().unwrap(), self.lambda() / eps)?;
        let sigma0 = moment_match_sigma(&target, 1.0, 256, seed ^ 0x5a5a);
        let chains = config.chains.max(1).min(n.max(1));
        let mut out = vec![0.0; n * dim];
        let mut y = vec![0.0; dim];
        for c in 0..chains {
            let mut r = rng::stream(seed, c as u64 + 1);
            let x0: Vec<f64> = (0..dim).map(|_| sigma0 * r.sample::<f64, _>(StandardNormal)).collect();
            let mut chain = HmcChain::new(&target, x0)?;
            let mut step = 0.5 * sigma0;
            for t in 0..config.burn_in {
                let acc = chain.step(step, config.leapfrog_steps, &mut r)?;
                let rate = 1.0 / sqrt(t as f64 + 1.0);
                step *= exp(rate * (acc - 0.65));
            }
            let mut i = c;
            while i < n {
                for _ in 0..config.thin.max(1) {
                    chain.step(step, config.leapfrog_steps, &mut r)?;
                }
                target.unwhiten(chain.position(), &mut y);
                for (o, v) in out[i * dim..(i + 1) * dim].iter_mut().zip(&y) {
                    *o = v / eps;
                }
                i += chains;
            }
        }
        if out.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("HMC produced a non-finite sample".into()));
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bcl_moments() {
        let m = BaselineModel::bcl2(10, 0.5).unwrap();
        let s = m.sample(1000, 3, &SampleConfig::default()).unwrap();
        let var = s.mean_of(|v| v * v);
        assert!((var - 1.0).abs() < 0.02, "{var}");
        let m = BaselineModel::bcl1(10, 4.0).unwrap();
        let s = m.sample(1000, 3, &SampleConfig::default()).unwrap();
        let ma = s.mean_of(f64::abs);
        assert!((ma - 0.25).abs() < 0.005, "{ma}");
    }

    #[test]
    fn gcl2_sample_covariance() {
        let m = BaselineModel::gcl2(2, 3.0, 0.5).unwrap();
        let s = m.sample(40000, 1, &SampleConfig::default()).unwrap();
        let a = m.operator().unwrap().to_dense();
        let prec = (a.transpose() * &a * 3.0 + DMatrix::identity(4, 4) * 0.5) * 2.0;
        let cov = prec.try_inverse().unwrap();
        let mut emp = DMatrix::<f64>::zeros(4, 4);
        for p in s.iter() {
            let v = nalgebra::DVector::from_column_slice(p);
            emp += &v * v.transpose();
        }
        emp /= s.len() as f64;
        assert!((emp - &cov).norm() < 0.03 * cov.norm());
    }

    #[test]
    fn deterministic() {
        let m = BaselineModel::gcl1(2, 2.0, 0.5).unwrap();
        let cfg = SampleConfig { burn_in: 50, ..SampleConfig::default() };
        assert_eq!(m.sample(20, 9, &cfg).unwrap(), m.sample(20, 9, &cfg).unwrap());
    }
}
