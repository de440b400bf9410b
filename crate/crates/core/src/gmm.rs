//! Zero-mean full-covariance Gaussian mixtures over flattened patches.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use nalgebra::{DMatrix, DMatrixView};
use rand::seq::SliceRandom;
use rand::Rng as _;
use rand_distr::StandardNormal;

use crate::error::{bail, Error, Result};
use crate::linalg::{chol_logdet, cholesky, floor_spectrum, lower_inverse, lower_mul, max_asymmetry};
use crate::math::{exp, ln, powf, LN_2PI};
use crate::patches::{PatchSet, Split};
use crate::rng;

/// Patches scored per gemm call.
const CHUNK: usize = 256;

#[derive(Debug, Clone, PartialEq)]
pub struct GmmModel {
    dim: usize,
    weights: Vec<f64>,
    covariances: Vec<DMatrix<f64>>,
    /// Stacked whiteners `L_j⁻¹` with `Σ_j = L_j L_jᵀ`, `(k·dim) × dim`.
    whiteners: DMatrix<f64>,
    /// Cholesky factors `L_j`, for sampling.
    factors: Vec<DMatrix<f64>>,
    /// `ln π_j - ½(dim·ln 2π + ln det Σ_j)`.
    offsets: Vec<f64>,
}

/// Stacked whiteners and log-determinants for `Σ_j + shift·I`.
fn factorize(covariances: &[DMatrix<f64>], shift: f64) -> Result<(DMatrix<f64>, Vec<DMatrix<f64>>, Vec<f64>)> {
    let k = covariances.len();
    let n = covariances[0].nrows();
    let mut stacked = DMatrix::zeros(k * n, n);
    let mut factors = Vec::with_capacity(k);
    let mut logdets = Vec::with_capacity(k);
    for (j, c) in covariances.iter().enumerate() {
        let m = c + DMatrix::identity(n, n) * shift;
        let chol = cholesky(m).map_err(|_| Error::Numerical(format!("covariance {j} is not positive definite")))?;
        logdets.push(chol_logdet(&chol));
        let l = chol.l();
        stacked.view_mut((j * n, 0), (n, n)).copy_from(&lower_inverse(&l));
        factors.push(l);
    }
    Ok((stacked, factors, logdets))
}

/// Writes `score[j + k·b] = offset_j - ½‖W_j x_b‖²` for each patch `b` of `xs`.
fn score_block(whiteners: &DMatrix<f64>, offsets: &[f64], n: usize, xs: &[f64], scores: &mut Vec<f64>, proj: &mut DMatrix<f64>) {
    let k = offsets.len();
    let b = xs.len() / n;
    let x = DMatrixView::from_slice(xs, n, b);
    if proj.ncols() != b {
        *proj = DMatrix::zeros(k * n, b);
    }
    proj.gemm(1.0, whiteners, &x, 0.0);
    scores.clear();
    for col in 0..b {
        let c = proj.column(col);
        let c = c.as_slice();
        for j in 0..k {
            let sq: f64 = c[j * n..(j + 1) * n].iter().map(|v| v * v).sum();
            scores.push(offsets[j] - 0.5 * sq);
        }
    }
}

impl GmmModel {
    /// Weights must be positive and sum to one within 1e-9 (they are kept as
    /// given); covariances symmetric positive definite.
    pub fn new(weights: Vec<f64>, covariances: Vec<DMatrix<f64>>) -> Result<Self> {
        let k = weights.len();
        if k == 0 || covariances.len() != k {
            bail!(DimensionMismatch, "{} weights for {} covariances", k, covariances.len());
        }
        let dim = covariances[0].nrows();
        for (j, c) in covariances.iter().enumerate() {
            if c.nrows() != dim || c.ncols() != dim {
                bail!(DimensionMismatch, "covariance {j} is {}x{}, expected {dim}x{dim}", c.nrows(), c.ncols());
            }
            if c.iter().any(|v| !v.is_finite()) {
                bail!(NonFinite, "covariance {j} has non-finite entries");
            }
            let scale = c.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            if max_asymmetry(c) > 1e-9 * scale {
                return Err(Error::NotSymmetric(max_asymmetry(c)));
            }
        }
        if weights.iter().any(|&w| !(w > 0.0 && w.is_finite())) {
            bail!(InvalidArgument, "mixture weights must be positive");
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            bail!(InvalidArgument, "mixture weights sum to {total}");
        }
        let (whiteners, factors, logdets) = factorize(&covariances, 0.0)?;
        let offsets = weights
            .iter()
            .zip(&logdets)
            .map(|(&w, &ld)| ln(w) - 0.5 * (dim as f64 * LN_2PI + ld))
            .collect();
        Ok(GmmModel { dim, weights, covariances, whiteners, factors, offsets })
    }

    pub fn k(&self) -> usize {
        self.weights.len()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn covariances(&self) -> &[DMatrix<f64>] {
        &self.covariances
    }

    /// `ln N(x; 0, Σ_j)` without the mixing weight.
    pub fn component_logpdf(&self, j: usize, x: &[f64]) -> Result<f64> {
        self.check_dim(x.len())?;
        let n = self.dim;
        let w = self.whiteners.view((j * n, 0), (n, n));
        let xv = DMatrixView::from_slice(x, n, 1);
        let sq = (w * xv).norm_squared();
        Ok(self.offsets[j] - ln(self.weights[j]) - 0.5 * sq)
    }

    fn check_dim(&self, len: usize) -> Result<()> {
        if len != self.dim {
            bail!(DimensionMismatch, "patch has {len} values, mixture dim is {}", self.dim);
        }
        Ok(())
    }

    pub fn logpdf(&self, x: &[f64]) -> Result<f64> {
        self.check_dim(x.len())?;
        Ok(self.logpdf_batch(x)?[0])
    }

    /// Log densities of a contiguous block of patches.
    pub fn logpdf_batch(&self, xs: &[f64]) -> Result<Vec<f64>> {
        let n = self.dim;
        if xs.len() % n != 0 {
            bail!(DimensionMismatch, "{} values is not a whole number of {n}-dim patches", xs.len());
        }
        let k = self.k();
        let mut out = Vec::with_capacity(xs.len() / n);
        let mut scores = Vec::new();
        let mut proj = DMatrix::zeros(0, 0);
        for chunk in xs.chunks(CHUNK * n) {
            score_block(&self.whiteners, &self.offsets, n, chunk, &mut scores, &mut proj);
            for s in scores.chunks_exact(k) {
                out.push(crate::math::log_sum_exp(s));
            }
        }
        Ok(out)
    }

    pub fn sample(&self, count: usize, seed: u64) -> Result<PatchSet> {
        let p = PatchSet::side_for_dim(self.dim)?;
        let mut rng = rng::seeded(seed);
        let mut cdf = Vec::with_capacity(self.k());
        let mut acc = 0.0;
        for w in &self.weights {
            acc += w;
            cdf.push(acc);
        }
        let mut data = Vec::with_capacity(count * self.dim);
        let mut z = vec![0.0; self.dim];
        let mut x = vec![0.0; self.dim];
        for _ in 0..count {
            let u: f64 = rng.random::<f64>() * acc;
            let j = cdf.iter().position(|&c| u < c).unwrap_or(self.k() - 1);
            z.iter_mut().for_each(|v| *v = rng.sample(StandardNormal));
            lower_mul(&self.factors[j], &z, &mut x);
            data.extend_from_slice(&x);
        }
        PatchSet::from_flat(p, Split::Train, data)
    }

    pub fn denoiser(&self, noise_var: f64) -> Result<GmmDenoiser<'_>> {
        if !(noise_var > 0.0 && noise_var.is_finite()) {
            bail!(InvalidArgument, "noise variance must be positive, got {noise_var}");
        }
        let (whiteners, _, logdets) = factorize(&self.covariances, noise_var)?;
        let offsets = self.weights.iter().zip(&logdets).map(|(&w, &ld)| ln(w) - 0.5 * ld).collect();
        let n = self.dim;
        let mut gains = Vec::with_capacity(self.k());
        for (j, s) in self.covariances.iter().enumerate() {
            let c = s + DMatrix::identity(n, n) * noise_var;
            let g = c
                .lu()
                .solve(s)
                .ok_or_else(|| Error::Numerical(format!("noisy covariance {j} is singular")))?;
            gains.push(g);
        }
        Ok(GmmDenoiser { model: self, whiteners, offsets, gains })
    }
}

/// Approximate MAP denoiser: pick the component with the highest posterior
/// for the noisy patch, then apply its Wiener filter.
#[derive(Debug, Clone)]
pub struct GmmDenoiser<'a> {
    model: &'a GmmModel,
    /// Stacked whiteners of `C_j = Σ_j + σ²I`.
    whiteners: DMatrix<f64>,
    offsets: Vec<f64>,
    /// Wiener gains `C_j⁻¹ Σ_j`.
    gains: Vec<DMatrix<f64>>,
}

impl GmmDenoiser<'_> {
    pub fn dim(&self) -> usize {
        self.model.dim
    }

    /// Denoise contiguous patches; optionally records the chosen components.
    pub fn denoise_batch(&self, ys: &[f64], out: &mut [f64], mut labels: Option<&mut [usize]>) {
        let n = self.model.dim;
        let k = self.model.k();
        let mut scores = Vec::new();
        let mut proj = DMatrix::zeros(0, 0);
        let mut first = 0;
        for (chunk, ochunk) in ys.chunks(CHUNK * n).zip(out.chunks_mut(CHUNK * n)) {
            score_block(&self.whiteners, &self.offsets, n, chunk, &mut scores, &mut proj);
            for (b, (y, o)) in chunk.chunks_exact(n).zip(ochunk.chunks_exact_mut(n)).enumerate() {
                let s = &scores[b * k..(b + 1) * k];
                let mut best = 0;
                for j in 1..k {
                    if s[j] > s[best] {
                        best = j;
                    }
                }
                if let Some(l) = labels.as_deref_mut() {
                    l[first + b] = best;
                }
                let g = &self.gains[best];
                for (i, oi) in o.iter_mut().enumerate() {
                    *oi = g.row(i).iter().zip(y).map(|(a, b)| a * b).sum();
                }
            }
            first += chunk.len() / n;
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GmmConfig {
    pub k: usize,
    pub minibatch_size: usize,
    pub epochs: usize,
    pub seed: u64,
    pub cov_floor: f64,
    /// Defaults to `1e-6 / k` when `None`.
    pub weight_floor: Option<f64>,
    /// Stepwise EM uses step `t^(-step_exponent)`.
    pub step_exponent: f64,
    /// Lloyd iterations after k-means++ seeding.
    pub kmeans_iters: usize,
    /// Responsibilities below this are dropped from the covariance statistics.
    pub prune: f64,
    /// Record the full-data log-likelihood after each epoch.
    pub track_likelihood: bool,
}

impl Default for GmmConfig {
    fn default() -> Self {
        GmmConfig {
            k: 20,
            minibatch_size: 10_000,
            epochs: 20,
            seed: 0,
            cov_floor: 1e-6,
            weight_floor: None,
            step_exponent: 0.7,
            kmeans_iters: 2,
            prune: 1e-10,
            track_likelihood: true,
        }
    }
}

impl GmmConfig {
    pub fn weight_floor(&self) -> f64 {
        self.weight_floor.unwrap_or(1e-6 / self.k as f64)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GmmFit {
    pub model: GmmModel,
    /// Mean log-likelihood per training patch: initial model, then after
    /// every epoch (`epochs + 1` entries when tracked).
    pub log_likelihood: Vec<f64>,
}

/// Per-sample averaged sufficient statistics.
struct Stats {
    mass: Vec<f64>,
    scatter: Vec<DMatrix<f64>>,
    mean_ll: f64,
}

/// Largest `π` with `π_j ≥ floor`, `Σπ = 1` maximizing `Σ n_j ln π_j`:
/// `π_j = max(floor, n_j/ν)`.
pub fn water_fill(mass: &[f64], floor: f64) -> Vec<f64> {
    let k = mass.len();
    let mut fixed = vec![false; k];
    loop {
        let free_mass: f64 = mass.iter().zip(&fixed).filter(|(_, &f)| !f).map(|(m, _)| m).sum();
        let n_fixed = fixed.iter().filter(|&&f| f).count();
        let budget = 1.0 - floor * n_fixed as f64;
        if free_mass <= 0.0 || budget <= 0.0 {
            return vec![1.0 / k as f64; k];
        }
        let nu = free_mass / budget;
        let mut changed = false;
        for j in 0..k {
            if !fixed[j] && mass[j] / nu < floor {
                fixed[j] = true;
                changed = true;
            }
        }
        if !changed {
            return (0..k).map(|j| if fixed[j] { floor } else { mass[j] / nu }).collect();
        }
    }
}

fn e_step(model: &GmmModel, xs: &[f64], prune: f64) -> Result<Stats> {
    let n = model.dim;
    let k = model.k();
    let count = xs.len() / n;
    let mut mass = vec![0.0; k];
    let mut scatter = vec![DMatrix::zeros(n, n); k];
    let mut total_ll = 0.0;
    let mut scores = Vec::new();
    let mut proj = DMatrix::zeros(0, 0);
    let mut resp = vec![0.0; k * CHUNK];
    let mut gather: Vec<Vec<f64>> = vec![Vec::new(); k];
    for chunk in xs.chunks(CHUNK * n) {
        let b = chunk.len() / n;
        score_block(&model.whiteners, &model.offsets, n, chunk, &mut scores, &mut proj);
        for i in 0..b {
            let s = &scores[i * k..(i + 1) * k];
            let lse = crate::math::log_sum_exp(s);
            if !lse.is_finite() {
                bail!(NonFinite, "log-likelihood of a training patch is not finite");
            }
            total_ll += lse;
            for j in 0..k {
                resp[i * k + j] = exp(s[j] - lse);
            }
        }
        for g in gather.iter_mut() {
            g.clear();
        }
        for i in 0..b {
            let x = &chunk[i * n..(i + 1) * n];
            for j in 0..k {
                let r = resp[i * k + j];
                mass[j] += r;
                if r > prune {
                    let sr = libm::sqrt(r);
                    gather[j].extend(x.iter().map(|v| v * sr));
                }
            }
        }
        for j in 0..k {
            let m = gather[j].len() / n;
            if m == 0 {
                continue;
            }
            let xj = DMatrixView::from_slice(&gather[j], n, m);
            scatter[j].gemm(1.0, &xj, &xj.transpose(), 1.0);
        }
    }
    let c = count as f64;
    for j in 0..k {
        mass[j] /= c;
        scatter[j] /= c;
        if !mass[j].is_finite() || scatter[j].iter().any(|v| !v.is_finite()) {
            bail!(NonFinite, "EM statistics for component {j} are not finite");
        }
    }
    Ok(Stats { mass, scatter, mean_ll: total_ll / c })
}

fn m_step(stats: &Stats, previous: &GmmModel, config: &GmmConfig) -> Result<GmmModel> {
    let weights = water_fill(&stats.mass, config.weight_floor());
    let covs = (0..stats.mass.len())
        .map(|j| {
            if stats.mass[j] > 1e-300 {
                floor_spectrum(&(&stats.scatter[j] / stats.mass[j]), config.cov_floor)
            } else {
                previous.covariances[j].clone()
            }
        })
        .collect();
    GmmModel::new(weights, covs)
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// k-means++ seeding plus a few Lloyd rounds; returns group labels.
fn kmeans_groups(data: &PatchSet, k: usize, iters: usize, seed: u64) -> Result<Vec<usize>> {
    let n = data.len();
    let dim = data.dim();
    let mut rng = rng::stream(seed, 0x6b6d);
    let mut centers: Vec<Vec<f64>> = Vec::with_capacity(k);
    centers.push(data.get(rng.random_range(0..n)).to_vec());
    let mut d2: Vec<f64> = data.iter().map(|x| sq_dist(x, &centers[0])).collect();
    while centers.len() < k {
        let total: f64 = d2.iter().sum();
        if !(total > 0.0) {
            bail!(
                InvalidArgument,
                "k = {k} exceeds the number of distinct training patches ({})",
                centers.len()
            );
        }
        let mut u = rng.random::<f64>() * total;
        let mut pick = n - 1;
        for (i, &d) in d2.iter().enumerate() {
            if u < d {
                pick = i;
                break;
            }
            u -= d;
        }
        if d2[pick] == 0.0 {
            pick = d2.iter().position(|&d| d > 0.0).unwrap();
        }
        let c = data.get(pick).to_vec();
        for (i, x) in data.iter().enumerate() {
            d2[i] = d2[i].min(sq_dist(x, &c));
        }
        centers.push(c);
    }
    let assign = |centers: &[Vec<f64>]| -> Vec<usize> {
        data.iter()
            .map(|x| {
                let mut best = 0;
                let mut bd = f64::INFINITY;
                for (j, c) in centers.iter().enumerate() {
                    let d = sq_dist(x, c);
                    if d < bd {
                        bd = d;
                        best = j;
                    }
                }
                best
            })
            .collect()
    };
    let mut labels = assign(&centers);
    for _ in 0..iters {
        let mut sums = vec![vec![0.0; dim]; k];
        let mut counts = vec![0usize; k];
        for (x, &l) in data.iter().zip(&labels) {
            counts[l] += 1;
            for (s, v) in sums[l].iter_mut().zip(x) {
                *s += v;
            }
        }
        for j in 0..k {
            if counts[j] > 0 {
                centers[j] = sums[j].iter().map(|s| s / counts[j] as f64).collect();
            }
        }
        labels = assign(&centers);
    }
    Ok(labels)
}

fn initial_model(data: &PatchSet, config: &GmmConfig) -> Result<GmmModel> {
    let k = config.k;
    let n = data.dim();
    let labels = kmeans_groups(data, k, config.kmeans_iters, config.seed)?;
    let mut counts = vec![0usize; k];
    let mut sums = vec![DMatrix::<f64>::zeros(n, n); k];
    let mut global = DMatrix::<f64>::zeros(n, n);
    for (x, &l) in data.iter().zip(&labels) {
        let v = DMatrixView::from_slice(x, n, 1);
        let outer = v * v.transpose();
        global += &outer;
        sums[l] += outer;
        counts[l] += 1;
    }
    global /= data.len() as f64;
    let eye = DMatrix::<f64>::identity(n, n) * config.cov_floor;
    let covs = (0..k)
        .map(|j| {
            let s = if counts[j] > 0 { &sums[j] / counts[j] as f64 } else { global.clone() };
            crate::linalg::symmetrize(&s) + &eye
        })
        .collect();
    let mass: Vec<f64> = counts.iter().map(|&c| c as f64 / data.len() as f64).collect();
    GmmModel::new(water_fill(&mass, config.weight_floor()), covs)
}

/// Train a mixture by EM. Full-batch EM when the minibatch covers the data,
/// stepwise EM with step `t^(-0.7)` otherwise.
pub fn fit(train: &PatchSet, config: &GmmConfig) -> Result<GmmFit> {
    let k = config.k;
    if k == 0 {
        bail!(InvalidArgument, "mixture needs at least one component");
    }
    if train.len() < 10 * k {
        bail!(InvalidArgument, "{} training patches is fewer than 10·k = {}", train.len(), 10 * k);
    }
    if !(config.cov_floor > 0.0) || !(config.weight_floor() > 0.0) || config.weight_floor() * k as f64 > 1.0 {
        bail!(InvalidArgument, "floors must be positive and k·weight_floor ≤ 1");
    }
    if config.minibatch_size == 0 {
        bail!(InvalidArgument, "minibatch size must be positive");
    }
    let mut model = initial_model(train, config)?;
    let mut trace = Vec::with_capacity(config.epochs + 1);
    let full_batch = config.minibatch_size >= train.len();
    if full_batch {
        for _ in 0..config.epochs {
            let stats = e_step(&model, train.as_flat(), config.prune)?;
            if config.track_likelihood {
                trace.push(stats.mean_ll);
            }
            model = m_step(&stats, &model, config)?;
        }
        if config.track_likelihood {
            trace.push(mean_ll(&model, train)?);
        }
        return Ok(GmmFit { model, log_likelihood: trace });
    }
    if config.track_likelihood {
        trace.push(mean_ll(&model, train)?);
    }
    let dim = train.dim();
    let mut order: Vec<usize> = (0..train.len()).collect();
    let mut rng = rng::stream(config.seed, 0x656d);
    let mut running: Option<Stats> = None;
    let mut t = 0usize;
    let mut batch = Vec::with_capacity(config.minibatch_size * dim);
    for _ in 0..config.epochs {
        order.shuffle(&mut rng);
        for idx in order.chunks(config.minibatch_size) {
            batch.clear();
            for &i in idx {
                batch.extend_from_slice(train.get(i));
            }
            let stats = e_step(&model, &batch, config.prune)?;
            t += 1;
            let eta = powf(t as f64, -config.step_exponent);
            running = Some(match running.take() {
                None => stats,
                Some(mut r) => {
                    for j in 0..k {
                        r.mass[j] = (1.0 - eta) * r.mass[j] + eta * stats.mass[j];
                        r.scatter[j] = &r.scatter[j] * (1.0 - eta) + &stats.scatter[j] * eta;
                    }
                    r
                }
            });
            model = m_step(running.as_ref().unwrap(), &model, config)?;
        }
        if config.track_likelihood {
            trace.push(mean_ll(&model, train)?);
        }
    }
    Ok(GmmFit { model, log_likelihood: trace })
}

fn mean_ll(model: &GmmModel, data: &PatchSet) -> Result<f64> {
    let lls = model.logpdf_batch(data.as_flat())?;
    Ok(lls.iter().sum::<f64>() / lls.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::math::PI;

    fn iso(k: usize, dim: usize, scales: &[f64], weights: &[f64]) -> GmmModel {
        let covs = (0..k).map(|j| DMatrix::identity(dim, dim) * scales[j]).collect();
        GmmModel::new(weights.to_vec(), covs).unwrap()
    }

    #[test]
    fn standard_normal_at_origin() {
        let m = iso(1, 64, &[1.0], &[1.0]);
        let v = m.logpdf(&[0.0; 64]).unwrap();
        assert!((v + 32.0 * ln(2.0 * PI)).abs() < 1e-10);
        assert!((v + 58.812).abs() < 1e-3);
    }

    #[test]
    fn two_component_closed_form() {
        let m = iso(2, 4, &[1.0, 4.0], &[0.5, 0.5]);
        let n1 = -2.0 * ln(2.0 * PI);
        let n2 = -2.0 * ln(2.0 * PI) - 0.5 * 4.0 * ln(4.0);
        let expect = ln(0.5 * exp(n1) + 0.5 * exp(n2));
        let x = [0.0; 4];
        assert!((m.logpdf(&x).unwrap() - expect).abs() < 1e-12);
        let y = [0.3, -0.2, 1.0, 0.5];
        let total = m.logpdf(&y).unwrap();
        for j in 0..2 {
            assert!(total >= ln(m.weights()[j]) + m.component_logpdf(j, &y).unwrap());
        }
    }

    #[test]
    fn wiener_examples() {
        let m = iso(1, 4, &[1.0], &[1.0]);
        let y = [0.4, -1.0, 2.0, 0.25];
        let mut out = [0.0; 4];
        m.denoiser(1.0).unwrap().denoise_batch(&y, &mut out, None);
        for i in 0..4 {
            assert_eq!(out[i], 0.5 * y[i]);
        }
        m.denoiser(1e-12).unwrap().denoise_batch(&y, &mut out, None);
        for i in 0..4 {
            assert!((out[i] - y[i]).abs() < 1e-9);
        }
        m.denoiser(1e12).unwrap().denoise_batch(&y, &mut out, None);
        assert!(out.iter().all(|v| v.abs() < 1e-9));
    }

    #[test]
    fn water_fill_respects_floor() {
        let w = water_fill(&[0.7, 0.3 - 1e-9, 1e-9], 1e-3);
        assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert_eq!(w[2], 1e-3);
        assert!((w[0] / w[1] - 0.7 / (0.3 - 1e-9)).abs() < 1e-9);
        assert_eq!(water_fill(&[0.5, 0.5], 1e-6), vec![0.5, 0.5]);
    }

    #[test]
    fn rejects_invalid() {
        assert!(GmmModel::new(vec![0.5, 0.6], vec![DMatrix::identity(2, 2); 2]).is_err());
        let mut c = DMatrix::identity(2, 2);
        c[(0, 1)] = 0.3;
        assert!(GmmModel::new(vec![1.0], vec![c]).is_err());
        assert!(GmmModel::new(vec![1.0], vec![DMatrix::zeros(2, 2)]).is_err());
    }

    #[test]
    fn single_component_is_scatter() {
        let mut rng = rng::seeded(4);
        let data: Vec<f64> = (0..400 * 4).map(|i| rng.sample::<f64, _>(StandardNormal) * (1.0 + (i % 4) as f64)).collect();
        let set = PatchSet::from_flat(2, Split::Train, data).unwrap();
        let cfg = GmmConfig { k: 1, epochs: 3, minibatch_size: 1_000_000, ..GmmConfig::default() };
        let fit = fit(&set, &cfg).unwrap();
        let mut scatter = DMatrix::<f64>::zeros(4, 4);
        for x in set.iter() {
            let v = DMatrixView::from_slice(x, 4, 1);
            scatter += v * v.transpose();
        }
        scatter /= set.len() as f64;
        assert!((&fit.model.covariances()[0] - &scatter).abs().max() <= 2.0 * cfg.cov_floor);
        assert_eq!(fit.model.weights(), &[1.0]);
        assert_eq!(fit.log_likelihood.len(), 4);
    }

    #[test]
    fn full_batch_em_is_monotone() {
        let mut rng = rng::seeded(11);
        let mut data = Vec::new();
        for i in 0..600 {
            let s = if i % 3 == 0 { 0.1 } else { 1.0 };
            for _ in 0..4 {
                data.push(s * rng.sample::<f64, _>(StandardNormal));
            }
        }
        let set = PatchSet::from_flat(2, Split::Train, data).unwrap();
        let cfg = GmmConfig { k: 3, epochs: 25, minibatch_size: usize::MAX, ..GmmConfig::default() };
        let fit = fit(&set, &cfg).unwrap();
        for w in fit.log_likelihood.windows(2) {
            assert!(w[1] >= w[0] - 1e-9 * w[0].abs(), "{:?}", fit.log_likelihood);
        }
    }

    #[test]
    fn too_few_distinct_patches() {
        let set = PatchSet::from_flat(1, Split::Train, vec![0.5; 100]).unwrap();
        let cfg = GmmConfig { k: 2, ..GmmConfig::default() };
        assert!(fit(&set, &cfg).is_err());
    }
}
