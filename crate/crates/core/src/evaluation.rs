//! Held-out likelihood reports, sample grids and flow benchmarks.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt::Write as _;

use crate::error::{bail, Result};
use crate::flow::{aepe, estimate_flow, interior_mask, FlowConfig};
use crate::image::Image;
use crate::math::{cos, mean_and_stderr, sin, sqrt, PI};
use crate::models::{DensityModel, SampleConfig};
use crate::patches::{FlowPair, PatchSet};

#[derive(Debug, Clone, PartialEq)]
pub struct LikelihoodRow {
    pub model: String,
    /// Mean log-likelihood per patch, nats.
    pub mean: f64,
    pub stderr: f64,
    pub count: usize,
    pub dim: usize,
    pub error: Option<String>,
}

impl LikelihoodRow {
    pub fn mean_per_pixel(&self) -> f64 {
        self.mean / self.dim as f64
    }

    pub fn stderr_per_pixel(&self) -> f64 {
        self.stderr / self.dim as f64
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct LikelihoodReport {
    /// Sorted by mean, highest first; failed rows last in input order.
    pub rows: Vec<LikelihoodRow>,
}

impl LikelihoodReport {
    /// Order rows by mean, highest first, with failed rows last.
    pub fn from_rows(rows: Vec<LikelihoodRow>) -> Self {
        let (mut ok, failed): (Vec<_>, Vec<_>) = rows.into_iter().partition(|r| r.error.is_none());
        ok.sort_by(|a, b| b.mean.total_cmp(&a.mean));
        ok.extend(failed);
        LikelihoodReport { rows: ok }
    }

    pub fn row(&self, model: &str) -> Option<&LikelihoodRow> {
        self.rows.iter().find(|r| r.model == model)
    }

    /// Header plus one line per row; floats use shortest round-trip form.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("model,mean_ll_patch,stderr_patch,mean_ll_pixel,stderr_pixel,count,error\n");
        for r in &self.rows {
            let err = r.error.as_deref().unwrap_or("").replace([',', '\n'], ";");
            let _ = writeln!(
                s,
                "{},{},{},{},{},{},{}",
                r.model,
                r.mean,
                r.stderr,
                r.mean_per_pixel(),
                r.stderr_per_pixel(),
                r.count,
                err
            );
        }
        s
    }
}

/// Mean and standard error of `log p` for every model over the same
/// patches. A model whose dimension does not match gets an error row.
pub fn evaluate_models<'a>(
    models: impl IntoIterator<Item = (&'a str, &'a DensityModel)>,
    test: &PatchSet,
) -> LikelihoodReport {
    let mut rows = Vec::new();
    for (name, m) in models {
        let base = LikelihoodRow {
            model: name.to_string(),
            mean: f64::NAN,
            stderr: f64::NAN,
            count: test.len(),
            dim: test.dim(),
            error: None,
        };
        rows.push(match m.log_likelihoods(test) {
            Ok(ll) if !ll.is_empty() => {
                let (mean, stderr) = mean_and_stderr(&ll);
                LikelihoodRow { mean, stderr, ..base }
            }
            Ok(_) => LikelihoodRow { error: Some("no test patches".into()), count: 0, ..base },
            Err(e) => LikelihoodRow { error: Some(e.to_string()), count: 0, ..base },
        });
    }
    LikelihoodReport::from_rows(rows)
}

/// Tile `rows × cols` model samples into one image: values in `[-1, 1]` map
/// affinely to `[0, 1]` (clipped) and tiles are separated by 1-px white
/// lines, giving `(rows(p+1)+1) × (cols(p+1)+1)` pixels.
pub fn render_sample_grid(model: &DensityModel, rows: usize, cols: usize, seed: u64) -> Result<Image> {
    render_sample_grid_with(model, rows, cols, seed, &SampleConfig::default())
}

/// As [`render_sample_grid`] with explicit HMC settings for the L1 families.
pub fn render_sample_grid_with(
    model: &DensityModel,
    rows: usize,
    cols: usize,
    seed: u64,
    sampling: &SampleConfig,
) -> Result<Image> {
    if rows == 0 || cols == 0 {
        bail!(InvalidArgument, "sample grid needs at least one row and column");
    }
    let p = PatchSet::side_for_dim(model.dim())?;
    let samples = model.sample_with(rows * cols, seed, sampling)?;
    let (w, h) = (cols * (p + 1) + 1, rows * (p + 1) + 1);
    let mut img = Image::filled(w, h, 1.0);
    for (i, patch) in samples.iter().enumerate() {
        let (r, c) = (i / cols, i % cols);
        for y in 0..p {
            for x in 0..p {
                let v = (0.5 * (patch[y * p + x] + 1.0)).clamp(0.0, 1.0);
                img.set(1 + c * (p + 1) + x, 1 + r * (p + 1) + y, v);
            }
        }
    }
    Ok(img)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BenchConfig {
    pub flow: FlowConfig,
    /// Border excluded from AEPE, pixels.
    pub margin: usize,
}

impl Default for BenchConfig {
    fn default() -> Self {
        BenchConfig { flow: FlowConfig { trace_epll: false, ..FlowConfig::default() }, margin: 8 }
    }
}

/// AEPE of one model on one pair, over the interior.
pub fn bench_pair(model: &DensityModel, pair: &FlowPair, config: &BenchConfig) -> Result<f64> {
    pair.check()?;
    let est = estimate_flow(model, &pair.i1, &pair.i2, &config.flow)?;
    let mask = interior_mask(pair.i1.width(), pair.i1.height(), config.margin);
    aepe(&est.flow, &pair.flow, Some(&mask))
}

#[derive(Debug, Clone, PartialEq)]
pub struct PairResult {
    pub model: String,
    pub pair: usize,
    pub aepe: core::result::Result<f64, String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchRow {
    pub model: String,
    /// Mean over the successful pairs (NaN if none succeeded).
    pub mean_aepe: f64,
    pub pairs: usize,
    pub failures: usize,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct BenchReport {
    pub per_pair: Vec<PairResult>,
    pub aggregate: Vec<BenchRow>,
}

impl BenchReport {
    /// Build the aggregate rows from per-pair results, keeping model order
    /// of first appearance.
    pub fn from_results(per_pair: Vec<PairResult>) -> Self {
        let mut aggregate: Vec<BenchRow> = Vec::new();
        let mut sums: Vec<f64> = Vec::new();
        for r in &per_pair {
            let idx = match aggregate.iter().position(|a| a.model == r.model) {
                Some(i) => i,
                None => {
                    aggregate.push(BenchRow { model: r.model.clone(), mean_aepe: f64::NAN, pairs: 0, failures: 0 });
                    sums.push(0.0);
                    aggregate.len() - 1
                }
            };
            match &r.aepe {
                Ok(e) => {
                    aggregate[idx].pairs += 1;
                    sums[idx] += e;
                }
                Err(_) => aggregate[idx].failures += 1,
            }
        }
        for (a, s) in aggregate.iter_mut().zip(sums) {
            if a.pairs > 0 {
                a.mean_aepe = s / a.pairs as f64;
            }
        }
        BenchReport { per_pair, aggregate }
    }

    pub fn row(&self, model: &str) -> Option<&BenchRow> {
        self.aggregate.iter().find(|r| r.model == model)
    }

    /// `model,pair,aepe,error`, one line per model and pair.
    pub fn per_pair_csv(&self) -> String {
        let mut s = String::from("model,pair,aepe,error\n");
        for r in &self.per_pair {
            match &r.aepe {
                Ok(e) => {
                    let _ = writeln!(s, "{},{},{},", r.model, r.pair, e);
                }
                Err(msg) => {
                    let _ = writeln!(s, "{},{},,{}", r.model, r.pair, msg.replace([',', '\n'], ";"));
                }
            }
        }
        s
    }

    /// `model,mean_aepe,pairs,failures`.
    pub fn aggregate_csv(&self) -> String {
        let mut s = String::from("model,mean_aepe,pairs,failures\n");
        for r in &self.aggregate {
            let _ = writeln!(s, "{},{},{},{}", r.model, r.mean_aepe, r.pairs, r.failures);
        }
        s
    }
}

/// Every model on every pair, serially. Failures are recorded per pair and
/// left out of the means.
pub fn benchmark_flow<'a>(
    models: impl IntoIterator<Item = (&'a str, &'a DensityModel)>,
    pairs: &[FlowPair],
    config: &BenchConfig,
) -> BenchReport {
    let mut results = Vec::new();
    for (name, m) in models {
        for (i, pair) in pairs.iter().enumerate() {
            let aepe = bench_pair(m, pair, config).map_err(|e| format!("{e}"));
            results.push(PairResult { model: name.to_string(), pair: i, aepe });
        }
    }
    BenchReport::from_results(results)
}

/// 1-based ranks with ties sharing their average rank.
pub fn average_ranks(xs: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..xs.len()).collect();
    idx.sort_by(|&a, &b| xs[a].total_cmp(&xs[b]));
    let mut ranks = alloc::vec![0.0; xs.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && xs[idx[j + 1]] == xs[idx[i]] {
            j += 1;
        }
        let r = (i + j) as f64 / 2.0 + 1.0;
        for &k in &idx[i..=j] {
            ranks[k] = r;
        }
        i = j + 1;
    }
    ranks
}

/// Pearson correlation; 0 when either input is constant.
pub fn pearson(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (x, y) in xs.iter().zip(ys) {
        sxy += (x - mx) * (y - my);
        sxx += (x - mx) * (x - mx);
        syy += (y - my) * (y - my);
    }
    if sxx == 0.0 || syy == 0.0 {
        0.0
    } else {
        sxy / sqrt(sxx * syy)
    }
}

/// Spearman rank correlation (Pearson correlation of average ranks).
pub fn spearman(xs: &[f64], ys: &[f64]) -> Result<f64> {
    if xs.len() != ys.len() {
        bail!(DimensionMismatch, "spearman inputs have lengths {} and {}", xs.len(), ys.len());
    }
    if xs.len() < 2 || xs.iter().chain(ys).any(|v| !v.is_finite()) {
        bail!(InvalidArgument, "spearman needs at least two finite pairs");
    }
    Ok(pearson(&average_ranks(xs), &average_ranks(ys)))
}

/// Orientations scanned by [`step_edge_correlation`].
pub const EDGE_ORIENTATIONS: usize = 24;

/// Best absolute Pearson correlation between a flattened `p × p` patch and
/// ideal step edges `[n·(x - c) > s]` over orientations and offsets `s`.
pub fn step_edge_correlation(patch: &[f64], p: usize) -> f64 {
    assert_eq!(patch.len(), p * p);
    let c = (p as f64 - 1.0) / 2.0;
    let mut best = 0.0f64;
    let mut template = alloc::vec![0.0; p * p];
    for k in 0..EDGE_ORIENTATIONS {
        let th = PI * k as f64 / EDGE_ORIENTATIONS as f64;
        let (nx, ny) = (cos(th), sin(th));
        let reach = (nx.abs() + ny.abs()) * c;
        let steps = (2.0 * reach / 0.25) as usize;
        for j in 0..=steps {
            let s = -reach + 0.25 * j as f64;
            for y in 0..p {
                for x in 0..p {
                    let d = nx * (x as f64 - c) + ny * (y as f64 - c);
                    template[y * p + x] = if d > s { 1.0 } else { 0.0 };
                }
            }
            best = best.max(pearson(patch, &template).abs());
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gmm::GmmModel;
    use crate::models::BaselineModel;
    use crate::patches::Split;
    use alloc::vec;
    use nalgebra::DMatrix;

    fn bcl2(l: f64) -> DensityModel {
        BaselineModel::bcl2(2, l).unwrap().into()
    }

    #[test]
    fn zero_patches_under_matched_gaussian() {
        let m: DensityModel = BaselineModel::bcl2(8, PI).unwrap().into();
        let test = PatchSet::from_flat(8, Split::Test, vec![0.0; 64 * 10]).unwrap();
        let r = evaluate_models([("BCL2", &m)], &test);
        assert_eq!((r.rows[0].mean, r.rows[0].stderr, r.rows[0].count), (0.0, 0.0, 10));
    }

    #[test]
    fn rows_are_sorted_and_reproducible() {
        let data: Vec<f64> = (0..4 * 50).map(|i| libm::sin(i as f64 * 0.77) * 0.4).collect();
        let test = PatchSet::from_flat(2, Split::Test, data).unwrap();
        let (a, b, c) = (bcl2(1.0), bcl2(1.0), bcl2(20.0));
        let wrong: DensityModel = BaselineModel::bcl2(3, 1.0).unwrap().into();
        let r = evaluate_models([("c", &c), ("a", &a), ("x", &wrong), ("b", &b)], &test);
        assert_eq!(r.rows[0].model, "a");
        assert_eq!(r.rows[0].mean, r.rows[1].mean);
        assert_eq!(r.rows[0].stderr, r.rows[1].stderr);
        assert!(r.rows[2].mean < r.rows[1].mean);
        assert!(r.rows[3].error.is_some());
        // Independent single-pass recomputation.
        let ll: Vec<f64> = test.iter().map(|p| a.logpdf(p).unwrap()).collect();
        let mean = ll.iter().sum::<f64>() / ll.len() as f64;
        assert!((mean - r.rows[0].mean).abs() < 1e-10);
        let csv = r.to_csv();
        let line = csv.lines().nth(1).unwrap();
        let mean_back: f64 = line.split(',').nth(1).unwrap().parse().unwrap();
        assert_eq!(mean_back, r.rows[0].mean);
    }

    #[test]
    fn ranking_ignores_patch_order() {
        let data: Vec<f64> = (0..4 * 40).map(|i| libm::cos(i as f64 * 1.3) * 0.2).collect();
        let test = PatchSet::from_flat(2, Split::Test, data).unwrap();
        let rev: Vec<usize> = (0..40).rev().collect();
        let (a, b) = (bcl2(3.0), BaselineModel::bcl1(2, 4.0).unwrap().into());
        let order = |t: &PatchSet| {
            evaluate_models([("a", &a), ("b", &b)], t).rows.iter().map(|r| r.model.clone()).collect::<Vec<_>>()
        };
        assert_eq!(order(&test), order(&test.select(&rev)));
    }

    #[test]
    fn sample_grid_geometry() {
        let m: DensityModel = BaselineModel::bcl2(8, 1e300).unwrap().into();
        let g = render_sample_grid(&m, 1, 1, 0).unwrap();
        assert_eq!((g.width(), g.height()), (10, 10));
        for y in 1..9 {
            for x in 1..9 {
                assert_eq!(g.get(x, y), 0.5);
            }
        }
        let m = GmmModel::new(vec![1.0], vec![DMatrix::identity(9, 9) * 0.1]).unwrap().into();
        let g = render_sample_grid(&m, 3, 5, 4).unwrap();
        assert_eq!((g.width(), g.height()), (5 * 4 + 1, 3 * 4 + 1));
        assert_eq!(g, render_sample_grid(&m, 3, 5, 4).unwrap());
    }

    #[test]
    fn spearman_examples() {
        assert!((spearman(&[1.0, 2.0, 3.0], &[10.0, 20.0, 30.0]).unwrap() - 1.0).abs() < 1e-15);
        assert!((spearman(&[1.0, 2.0, 3.0], &[3.0, 2.0, 1.0]).unwrap() + 1.0).abs() < 1e-15);
        assert_eq!(average_ranks(&[5.0, 1.0, 5.0, 2.0]), vec![3.5, 1.0, 3.5, 2.0]);
        assert!(spearman(&[1.0], &[1.0]).is_err());
    }

    #[test]
    fn edge_templates() {
        let p = 8;
        let edge: Vec<f64> = (0..64).map(|i| if (i % 8) as f64 + 0.6 * (i / 8) as f64 > 5.0 { 0.3 } else { -0.1 }).collect();
        assert!(step_edge_correlation(&edge, p) > 0.9);
        let checker: Vec<f64> = (0..64).map(|i| if (i % 8 + i / 8) % 2 == 0 { 1.0 } else { -1.0 }).collect();
        assert!(step_edge_correlation(&checker, p) < 0.3);
    }

    #[test]
    fn aggregate_of_one_pair() {
        let r = BenchReport::from_results(vec![
            PairResult { model: "m".into(), pair: 0, aepe: Ok(0.25) },
            PairResult { model: "n".into(), pair: 0, aepe: Err("boom".into()) },
        ]);
        assert_eq!(r.row("m").unwrap().mean_aepe, 0.25);
        assert_eq!(r.row("n").unwrap().failures, 1);
        assert!(r.row("n").unwrap().mean_aepe.is_nan());
    }
}
