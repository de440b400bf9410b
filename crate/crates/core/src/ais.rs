//! Annealed importance sampling with Hamiltonian transitions, for the log
//! normalizer of unnormalized densities `exp(-E(x))`.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use rand::Rng as _;
use rand_distr::StandardNormal;

use crate::error::{bail, Result};
use crate::math::{exp, ln, log_mean_exp, powf, sqrt, LN_2PI};
use crate::rng::{self, Rng};

/// A target density `exp(-E(x))` on ℝⁿ.
pub trait Energy {
    fn dim(&self) -> usize;

    fn energy(&self, x: &[f64]) -> f64;

    /// Writes ∇E(x) into `grad` and returns E(x).
    fn energy_grad(&self, x: &[f64], grad: &mut [f64]) -> f64;
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AisConfig {
    pub n_chains: usize,
    pub n_temps: usize,
    pub leapfrog_steps: usize,
    /// Initial leapfrog step, in units of the base scale σ₀.
    pub step_size: f64,
    /// Chains used to tune the per-temperature step size before the main run.
    /// Zero keeps `step_size` fixed.
    pub pilot_chains: usize,
    pub target_acceptance: f64,
    pub seed: u64,
}

impl Default for AisConfig {
    fn default() -> Self {
        AisConfig {
            n_chains: 512,
            n_temps: 1000,
            leapfrog_steps: 5,
            step_size: 0.2,
            pilot_chains: 32,
            target_acceptance: 0.65,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AisEstimate {
    pub log_z: f64,
    pub stderr: f64,
    pub ess: f64,
    /// Mean Metropolis acceptance probability over all main-run transitions.
    pub acceptance: f64,
    pub n_chains: usize,
    pub n_temps: usize,
    pub leapfrog_steps: usize,
    pub warning: Option<String>,
}

/// Log normalizer of N(0, σ²I) in `dim` dimensions.
pub fn gaussian_log_z(dim: usize, sigma: f64) -> f64 {
    0.5 * dim as f64 * (LN_2PI + 2.0 * ln(sigma))
}

/// Base scale σ₀ whose mean energy matches the target's, for an energy that
/// is positively homogeneous of degree `degree` (then E[E] = n/degree under
/// the normalized target).
pub fn moment_match_sigma<E: Energy + ?Sized>(target: &E, degree: f64, samples: usize, seed: u64) -> f64 {
    let n = target.dim();
    let mut rng = rng::seeded(seed);
    let mut z = vec![0.0; n];
    let mut total = 0.0;
    for _ in 0..samples.max(1) {
        z.iter_mut().for_each(|v| *v = rng.sample(StandardNormal));
        total += target.energy(&z);
    }
    let mean = total / samples.max(1) as f64;
    powf(n as f64 / degree / mean, 1.0 / degree)
}

/// Tempered potential `U = (1-β)‖x‖²/(2σ₀²) + β E(x)` and its gradient.
struct Tempered<'a, E: ?Sized> {
    target: &'a E,
    inv_var: f64,
    beta: f64,
}

impl<E: Energy + ?Sized> Tempered<'_, E> {
    /// Returns (U, E); `grad` receives ∇U and `egrad` scratch receives ∇E.
    fn eval(&self, x: &[f64], grad: &mut [f64], egrad: &mut [f64]) -> (f64, f64) {
        let e = self.target.energy_grad(x, egrad);
        let mut sq = 0.0;
        for i in 0..x.len() {
            sq += x[i] * x[i];
            grad[i] = (1.0 - self.beta) * self.inv_var * x[i] + self.beta * egrad[i];
        }
        ((1.0 - self.beta) * 0.5 * self.inv_var * sq + self.beta * e, e)
    }
}

/// Leapfrog integration of Hamiltonian dynamics with unit mass for the
/// potential whose gradient is `grad_u`. Updates `x` and `p` in place.
pub fn leapfrog(
    x: &mut [f64],
    p: &mut [f64],
    step: f64,
    steps: usize,
    mut grad_u: impl FnMut(&[f64], &mut [f64]),
) {
    let n = x.len();
    let mut g = vec![0.0; n];
    grad_u(x, &mut g);
    for _ in 0..steps {
        for i in 0..n {
            p[i] -= 0.5 * step * g[i];
            x[i] += step * p[i];
        }
        grad_u(x, &mut g);
        for i in 0..n {
            p[i] -= 0.5 * step * g[i];
        }
    }
}

struct Chain {
    x: Vec<f64>,
    /// Target energy at `x`.
    e: f64,
}

struct Scratch {
    x: Vec<f64>,
    p: Vec<f64>,
    g: Vec<f64>,
    eg: Vec<f64>,
}

impl Scratch {
    fn new(n: usize) -> Self {
        Scratch { x: vec![0.0; n], p: vec![0.0; n], g: vec![0.0; n], eg: vec![0.0; n] }
    }
}

/// One HMC transition at inverse temperature `beta`; returns the acceptance
/// probability.
fn hmc_step<E: Energy + ?Sized>(
    target: &Tempered<'_, E>,
    chain: &mut Chain,
    step: f64,
    steps: usize,
    rng: &mut Rng,
    s: &mut Scratch,
) -> Result<f64> {
    let n = chain.x.len();
    s.x.copy_from_slice(&chain.x);
    let mut k0 = 0.0;
    for v in s.p.iter_mut() {
        *v = rng.sample(StandardNormal);
        k0 += *v * *v;
    }
    let sq0: f64 = chain.x.iter().map(|v| v * v).sum();
    let u0 = (1.0 - target.beta) * 0.5 * target.inv_var * sq0 + target.beta * chain.e;
    target.eval(&s.x, &mut s.g, &mut s.eg);
    let mut u1 = 0.0;
    let mut e1 = 0.0;
    for _ in 0..steps {
        for i in 0..n {
            s.p[i] -= 0.5 * step * s.g[i];
            s.x[i] += step * s.p[i];
        }
        let (u, e) = target.eval(&s.x, &mut s.g, &mut s.eg);
        u1 = u;
        e1 = e;
        for i in 0..n {
            s.p[i] -= 0.5 * step * s.g[i];
        }
    }
    if steps == 0 {
        return Ok(1.0);
    }
    let k1: f64 = s.p.iter().map(|v| v * v).sum();
    let log_ratio = (u0 + 0.5 * k0) - (u1 + 0.5 * k1);
    let accept = if log_ratio.is_nan() { 0.0 } else { exp(log_ratio.min(0.0)) };
    let uniform: f64 = rng.random();
    if uniform < accept && e1.is_finite() {
        chain.x.copy_from_slice(&s.x);
        chain.e = e1;
    }
    Ok(accept)
}

fn init_chain<E: Energy + ?Sized>(target: &E, sigma0: f64, rng: &mut Rng) -> Result<Chain> {
    let x: Vec<f64> = (0..target.dim()).map(|_| sigma0 * rng.sample::<f64, _>(StandardNormal)).collect();
    let e = target.energy(&x);
    if !e.is_finite() {
        bail!(NonFinite, "target energy is not finite at a base sample");
    }
    Ok(Chain { x, e })
}

fn betas(n_temps: usize) -> Vec<f64> {
    (0..n_temps).map(|i| i as f64 / (n_temps - 1) as f64).collect()
}

/// Per-temperature step sizes (in σ₀ units) tuned on a short pilot run.
fn pilot_schedule<E: Energy + ?Sized>(target: &E, sigma0: f64, config: &AisConfig) -> Result<Vec<f64>> {
    let n_temps = config.n_temps;
    let mut schedule = vec![config.step_size; n_temps];
    if config.pilot_chains == 0 || config.leapfrog_steps == 0 {
        return Ok(schedule);
    }
    let bs = betas(n_temps);
    let mut rngs: Vec<Rng> = (0..config.pilot_chains)
        .map(|c| rng::stream(config.seed, (1u64 << 40) + c as u64))
        .collect();
    let mut chains = Vec::with_capacity(config.pilot_chains);
    for r in rngs.iter_mut() {
        chains.push(init_chain(target, sigma0, r)?);
    }
    let mut scratch = Scratch::new(target.dim());
    let mut step = config.step_size;
    let inv_var = 1.0 / (sigma0 * sigma0);
    for i in 1..n_temps - 1 {
        let tempered = Tempered { target, inv_var, beta: bs[i] };
        let mut acc = 0.0;
        for (chain, r) in chains.iter_mut().zip(rngs.iter_mut()) {
            acc += hmc_step(&tempered, chain, step * sigma0, config.leapfrog_steps, r, &mut scratch)?;
        }
        acc /= config.pilot_chains as f64;
        step *= exp((acc - config.target_acceptance).clamp(-0.5, 0.5));
        step = step.clamp(1e-4, 10.0);
        schedule[i] = step;
    }
    Ok(schedule)
}

/// A single HMC chain targeting `exp(-E(x))`, used for long-run sampling.
pub(crate) struct HmcChain<'a, E: ?Sized> {
    tempered: Tempered<'a, E>,
    chain: Chain,
    scratch: Scratch,
}

impl<'a, E: Energy + ?Sized> HmcChain<'a, E> {
    pub(crate) fn new(target: &'a E, x0: Vec<f64>) -> Result<Self> {
        let e = target.energy(&x0);
        if !e.is_finite() {
            bail!(NonFinite, "target energy is not finite at the starting point");
        }
        let n = x0.len();
        Ok(HmcChain {
            tempered: Tempered { target, inv_var: 0.0, beta: 1.0 },
            chain: Chain { x: x0, e },
            scratch: Scratch::new(n),
        })
    }

    /// One transition; returns the acceptance probability.
    pub(crate) fn step(&mut self, step: f64, steps: usize, rng: &mut Rng) -> Result<f64> {
        hmc_step(&self.tempered, &mut self.chain, step, steps, rng, &mut self.scratch)
    }

    pub(crate) fn position(&self) -> &[f64] {
        &self.chain.x
    }
}

/// Estimate `log ∫ exp(-E(x)) dx` by annealing from N(0, σ₀²I) along the
/// geometric path with linearly spaced inverse temperatures.
pub fn ais_log_z<E: Energy + ?Sized>(target: &E, sigma0: f64, config: &AisConfig) -> Result<AisEstimate> {
    if config.n_temps < 2 {
        bail!(InvalidArgument, "AIS needs at least 2 temperatures, got {}", config.n_temps);
    }
    if config.n_chains == 0 {
        bail!(InvalidArgument, "AIS needs at least one chain");
    }
    if !(sigma0 > 0.0 && sigma0.is_finite()) {
        bail!(InvalidArgument, "base scale must be positive, got {sigma0}");
    }
    let n = target.dim();
    let schedule = pilot_schedule(target, sigma0, config)?;
    let bs = betas(config.n_temps);
    let inv_var = 1.0 / (sigma0 * sigma0);
    let mut scratch = Scratch::new(n);
    let mut log_w = Vec::with_capacity(config.n_chains);
    let mut acc_total = 0.0;
    let mut acc_count = 0usize;
    for c in 0..config.n_chains {
        let mut r = rng::stream(config.seed, c as u64);
        let mut chain = init_chain(target, sigma0, &mut r)?;
        let mut lw = 0.0;
        for i in 1..config.n_temps {
            let sq: f64 = chain.x.iter().map(|v| v * v).sum();
            let log_t = -chain.e;
            let log_b = -0.5 * inv_var * sq;
            lw += (bs[i] - bs[i - 1]) * (log_t - log_b);
            if i < config.n_temps - 1 {
                let tempered = Tempered { target, inv_var, beta: bs[i] };
                acc_total += hmc_step(
                    &tempered,
                    &mut chain,
                    schedule[i] * sigma0,
                    config.leapfrog_steps,
                    &mut r,
                    &mut scratch,
                )?;
                acc_count += 1;
            }
        }
        if !lw.is_finite() {
            bail!(NonFinite, "chain {c} produced a non-finite log weight");
        }
        log_w.push(lw);
    }
    let log_z0 = gaussian_log_z(n, sigma0);
    let log_z = log_z0 + log_mean_exp(&log_w);
    let m = log_w.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let w: Vec<f64> = log_w.iter().map(|&l| exp(l - m)).collect();
    let sum: f64 = w.iter().sum();
    let sum_sq: f64 = w.iter().map(|v| v * v).sum();
    let k = w.len() as f64;
    let mean = sum / k;
    let stderr = if w.len() > 1 {
        let var = w.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (k - 1.0);
        sqrt(var / k) / mean
    } else {
        0.0
    };
    let ess = sum * sum / sum_sq;
    let acceptance = if acc_count == 0 { 1.0 } else { acc_total / acc_count as f64 };
    let warning = if acc_count > 0 && !(0.2..=0.95).contains(&acceptance) {
        Some(format!("mean HMC acceptance {acceptance:.3} is outside [0.2, 0.95]"))
    } else {
        None
    };
    Ok(AisEstimate {
        log_z,
        stderr,
        ess,
        acceptance,
        n_chains: config.n_chains,
        n_temps: config.n_temps,
        leapfrog_steps: config.leapfrog_steps,
        warning,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    struct Gauss(usize);
    impl Energy for Gauss {
        fn dim(&self) -> usize {
            self.0
        }
        fn energy(&self, x: &[f64]) -> f64 {
            0.5 * x.iter().map(|v| v * v).sum::<f64>()
        }
        fn energy_grad(&self, x: &[f64], g: &mut [f64]) -> f64 {
            g.copy_from_slice(x);
            self.energy(x)
        }
    }

    struct Laplace {
        dim: usize,
        lambda: f64,
    }
    impl Energy for Laplace {
        fn dim(&self) -> usize {
            self.dim
        }
        fn energy(&self, x: &[f64]) -> f64 {
            self.lambda * x.iter().map(|v| v.abs()).sum::<f64>()
        }
        fn energy_grad(&self, x: &[f64], g: &mut [f64]) -> f64 {
            for (gi, &xi) in g.iter_mut().zip(x) {
                *gi = self.lambda * crate::math::sign(xi);
            }
            self.energy(x)
        }
    }

    fn quick() -> AisConfig {
        AisConfig { n_chains: 128, n_temps: 200, ..AisConfig::default() }
    }

    #[test]
    fn two_temperatures_on_the_base_are_exact() {
        let cfg = AisConfig { n_temps: 2, n_chains: 16, ..AisConfig::default() };
        let est = ais_log_z(&Gauss(5), 1.0, &cfg).unwrap();
        assert_eq!(est.log_z, gaussian_log_z(5, 1.0));
        assert_eq!(est.stderr, 0.0);
        assert_eq!(est.ess, 16.0);
    }

    #[test]
    fn gaussian_and_laplace_normalizers() {
        let g = Gauss(8);
        let est = ais_log_z(&g, 1.7, &quick()).unwrap();
        let truth = 4.0 * LN_2PI;
        assert!((est.log_z - truth).abs() < 3.0 * est.stderr + 1e-9, "{est:?} vs {truth}");

        let l = Laplace { dim: 8, lambda: 2.0 };
        let sigma = moment_match_sigma(&l, 1.0, 256, 3);
        let est = ais_log_z(&l, sigma, &quick()).unwrap();
        assert!(est.log_z.abs() < 3.0 * est.stderr, "{est:?}");
        assert!(est.ess >= 1.0 && est.ess <= 128.0);
        assert!(est.warning.is_none(), "{est:?}");
    }

    #[test]
    fn deterministic_per_seed() {
        let l = Laplace { dim: 4, lambda: 1.0 };
        let a = ais_log_z(&l, 1.0, &AisConfig { n_chains: 8, n_temps: 20, ..AisConfig::default() }).unwrap();
        let b = ais_log_z(&l, 1.0, &AisConfig { n_chains: 8, n_temps: 20, ..AisConfig::default() }).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn rejects_bad_config() {
        assert!(ais_log_z(&Gauss(2), 1.0, &AisConfig { n_temps: 1, ..AisConfig::default() }).is_err());
        assert!(ais_log_z(&Gauss(2), 0.0, &AisConfig::default()).is_err());
    }

    #[test]
    fn leapfrog_is_reversible() {
        let x0 = [0.3, -1.2, 0.7, 2.0];
        let p0 = [0.5, 0.1, -0.9, 0.0];
        let grad = |x: &[f64], g: &mut [f64]| {
            for i in 0..x.len() {
                g[i] = x[i] * (1.0 + 0.1 * i as f64) + 0.2 * libm::sin(x[i]);
            }
        };
        let mut x = x0;
        let mut p = p0;
        leapfrog(&mut x, &mut p, 0.13, 17, grad);
        p.iter_mut().for_each(|v| *v = -*v);
        leapfrog(&mut x, &mut p, 0.13, 17, grad);
        for i in 0..4 {
            assert!((x[i] - x0[i]).abs() < 1e-10);
            assert!((p[i] + p0[i]).abs() < 1e-10);
        }
    }
}
