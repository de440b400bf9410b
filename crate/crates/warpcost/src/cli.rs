//! Command-line front end.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use warpcost_core::evaluation::{
    bench_pair, render_sample_grid_with, step_edge_correlation, BenchReport, LikelihoodReport, PairResult,
};
use warpcost_core::flow::{aepe, denoise_image, estimate_flow_observed, interior_mask, IterationView};
use warpcost_core::gmm;
use warpcost_core::models::{eigen_summary, fit_baseline, DensityModel, Family};
use warpcost_core::patches::{build_dataset, split_pairs, DatasetConfig, FlowPair, PatchSet, Split};

use crate::config::{ConfigError, RunConfig, SplitChoice};
use crate::formats::{self, FormatError};
use crate::model_io::{load_model, save_model};

pub const THREADS_ENV: &str = "WARPCOST_THREADS";

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Data(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Data(_) => 2,
        }
    }
}

impl From<FormatError> for CliError {
    fn from(e: FormatError) -> Self {
        CliError::Data(e.to_string())
    }
}

impl From<warpcost_core::Error> for CliError {
    fn from(e: warpcost_core::Error) -> Self {
        CliError::Data(e.to_string())
    }
}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        match e {
            ConfigError::Io { .. } => CliError::Data(e.to_string()),
            _ => CliError::Usage(e.to_string()),
        }
    }
}

type Result<T> = std::result::Result<T, CliError>;

#[derive(Debug, Parser)]
#[command(name = "warpcost", version, about = "Density models of optical-flow warp error and EPLL flow estimation")]
pub struct Cli {
    /// Seed for every random choice (overrides the config file).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads, 0 = one per core (falls back to WARPCOST_THREADS).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Flat `key = value` configuration file.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Override one configuration key; repeatable.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    set: Vec<String>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Patch datasets.
    #[command(subcommand)]
    Dataset(DatasetCmd),
    /// Baseline models: fitting, evaluation, sampling, eigen-analysis.
    #[command(subcommand)]
    Model(ModelCmd),
    /// Gaussian mixture training.
    #[command(subcommand)]
    Gmm(GmmCmd),
    /// Flow estimation and scoring.
    #[command(subcommand)]
    Flow(FlowCmd),
    /// Denoise an image with a patch model (EPLL).
    Denoise(DenoiseArgs),
    /// Print the effective configuration.
    Config,
}

#[derive(Debug, Subcommand)]
enum DatasetCmd {
    /// Warp-error patches from a list of `i1.pgm i2.pgm flow.flo` lines.
    Build(DatasetBuildArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum SplitArg {
    All,
    Train,
    Test,
}

#[derive(Debug, Args)]
struct DatasetBuildArgs {
    #[arg(long, value_name = "LIST")]
    pairs: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    patch_size: Option<usize>,
    #[arg(long)]
    stride: Option<usize>,
    /// Random subsample size (0 = keep all).
    #[arg(long)]
    samples: Option<usize>,
    #[arg(long, value_enum)]
    split: Option<SplitArg>,
    #[arg(long)]
    train_fraction: Option<f64>,
}

#[derive(Debug, Subcommand)]
enum ModelCmd {
    /// Maximum-likelihood fit of a baseline family.
    Fit(FitArgs),
    /// Held-out log-likelihood table.
    Eval(EvalArgs),
    /// Grid of model samples as a PGM.
    Sample(SampleArgs),
    /// Eigen-analysis of GMM components or Gaussian covariances.
    Eig(EigArgs),
}

#[derive(Debug, Args)]
struct FitArgs {
    #[arg(long)]
    family: String,
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct EvalArgs {
    #[arg(long)]
    data: PathBuf,
    #[arg(long = "model", required = true, num_args = 1..)]
    models: Vec<PathBuf>,
    /// CSV destination (stdout when absent).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct SampleArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    rows: Option<usize>,
    #[arg(long)]
    cols: Option<usize>,
}

#[derive(Debug, Args)]
struct EigArgs {
    #[arg(long)]
    model: Option<PathBuf>,
    /// Analyse the second-moment matrix of a dataset instead.
    #[arg(long)]
    data: Option<PathBuf>,
    #[arg(long)]
    threshold: Option<f64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
enum GmmCmd {
    /// Train a zero-mean GMM with (mini-batch) EM.
    Train(GmmTrainArgs),
}

#[derive(Debug, Args)]
struct GmmTrainArgs {
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    k: Option<usize>,
    #[arg(long)]
    minibatch: Option<usize>,
    #[arg(long)]
    epochs: Option<usize>,
    /// Use the whole training set as one batch.
    #[arg(long)]
    full_batch: bool,
    /// Per-epoch mean log-likelihood CSV.
    #[arg(long)]
    trace: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
enum FlowCmd {
    /// Estimate flow between two frames.
    Estimate(EstimateArgs),
    /// Average end-point error between two .flo files.
    Aepe(AepeArgs),
    /// AEPE of several models over a list of pairs.
    Bench(BenchArgs),
}

#[derive(Debug, Args)]
struct EstimateArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    i1: PathBuf,
    #[arg(long)]
    i2: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Cost trace CSV.
    #[arg(long)]
    trace: Option<PathBuf>,
    /// Write warp-error and r images of every iteration here.
    #[arg(long)]
    dump_dir: Option<PathBuf>,
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long)]
    iterations: Option<usize>,
}

#[derive(Debug, Args)]
struct AepeArgs {
    #[arg(long)]
    est: PathBuf,
    #[arg(long)]
    gt: PathBuf,
    /// Ignore this many border pixels.
    #[arg(long, default_value_t = 0)]
    margin: usize,
}

#[derive(Debug, Args)]
struct BenchArgs {
    #[arg(long = "model", required = true, num_args = 1..)]
    models: Vec<PathBuf>,
    #[arg(long, value_name = "LIST")]
    pairs: PathBuf,
    /// Aggregate CSV (stdout when absent).
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    per_pair: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct DenoiseArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    sigma: f64,
    #[arg(long)]
    out: PathBuf,
}

/// Parse and run; returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match execute(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn resolve_config(cli: &Cli) -> Result<RunConfig> {
    let mut cfg = RunConfig::default();
    if let Some(path) = &cli.config {
        cfg.apply_file(path)?;
    }
    for kv in &cli.set {
        let (k, v) = kv.split_once('=').ok_or_else(|| CliError::Usage(format!("--set expects KEY=VALUE, got {kv:?}")))?;
        cfg.set(k.trim(), v.trim())?;
    }
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    if let Some(t) = cli.threads {
        cfg.threads = t;
    } else if let Ok(v) = std::env::var(THREADS_ENV) {
        cfg.threads = v.trim().parse().map_err(|_| CliError::Usage(format!("{THREADS_ENV} must be a count, got {v:?}")))?;
    }
    Ok(cfg)
}

fn set_opt<T: ToString>(cfg: &mut RunConfig, key: &str, v: Option<T>) -> Result<()> {
    if let Some(v) = v {
        cfg.set(key, &v.to_string())?;
    }
    Ok(())
}

fn execute(cli: Cli) -> Result<()> {
    let mut cfg = resolve_config(&cli)?;
    // A global pool can only be installed once per process; later calls keep it.
    let _ = rayon::ThreadPoolBuilder::new().num_threads(cfg.threads).build_global();
    match cli.command {
        Command::Config => {
            print!("{}", cfg.to_text());
            Ok(())
        }
        Command::Dataset(DatasetCmd::Build(a)) => {
            set_opt(&mut cfg, "dataset.patch_size", a.patch_size)?;
            set_opt(&mut cfg, "dataset.stride", a.stride)?;
            set_opt(&mut cfg, "dataset.samples", a.samples)?;
            set_opt(&mut cfg, "dataset.train_fraction", a.train_fraction)?;
            if let Some(s) = a.split {
                cfg.dataset.split = match s {
                    SplitArg::All => SplitChoice::All,
                    SplitArg::Train => SplitChoice::Train,
                    SplitArg::Test => SplitChoice::Test,
                };
            }
            dataset_build(&cfg, &a.pairs, &a.out)
        }
        Command::Model(ModelCmd::Fit(a)) => model_fit(&cfg, &a),
        Command::Model(ModelCmd::Eval(a)) => model_eval(&a),
        Command::Model(ModelCmd::Sample(a)) => {
            set_opt(&mut cfg, "grid.rows", a.rows)?;
            set_opt(&mut cfg, "grid.cols", a.cols)?;
            let model = load_model(&a.model)?;
            let grid = render_sample_grid_with(&model, cfg.grid_rows, cfg.grid_cols, cfg.seed, &cfg.sample)?;
            formats::write_pgm(&grid, &a.out, 255)?;
            Ok(())
        }
        Command::Model(ModelCmd::Eig(a)) => {
            set_opt(&mut cfg, "eig.threshold", a.threshold)?;
            model_eig(&cfg, &a)
        }
        Command::Gmm(GmmCmd::Train(a)) => {
            set_opt(&mut cfg, "gmm.k", a.k)?;
            set_opt(&mut cfg, "gmm.minibatch", a.minibatch)?;
            set_opt(&mut cfg, "gmm.epochs", a.epochs)?;
            gmm_train(&cfg, &a)
        }
        Command::Flow(FlowCmd::Estimate(a)) => {
            set_opt(&mut cfg, "flow.lambda", a.lambda)?;
            set_opt(&mut cfg, "flow.iterations", a.iterations)?;
            flow_estimate(&cfg, &a)
        }
        Command::Flow(FlowCmd::Aepe(a)) => {
            let est = formats::read_flo(&a.est)?;
            let gt = formats::read_flo(&a.gt)?;
            let mask = (a.margin > 0).then(|| interior_mask(est.width(), est.height(), a.margin));
            println!("{}", aepe(&est, &gt, mask.as_deref())?);
            Ok(())
        }
        Command::Flow(FlowCmd::Bench(a)) => flow_bench(&cfg, &a),
        Command::Denoise(a) => {
            let model = load_model(&a.model)?;
            let pgm = formats::read_pgm_full(&a.input)?;
            let signed = pgm.is_signed();
            let img = if signed { pgm.image.map(|v| 2.0 * v - 1.0) } else { pgm.image };
            let out = denoise_image(&model, &img, a.sigma)?;
            if signed {
                formats::write_signed_pgm(&out, &a.out, 65535)?;
            } else {
                formats::write_pgm(&out, &a.out, 65535)?;
            }
            Ok(())
        }
    }
}

/// Lines of `i1 i2 flow` paths, relative to the list's directory; `#`
/// starts a comment.
pub fn read_pair_list(path: &Path) -> Result<Vec<[PathBuf; 3]>> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
    let base = path.parent().unwrap_or(Path::new(""));
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let parts: Vec<&str> = line.split_whitespace().collect();
        if parts.len() != 3 {
            return Err(CliError::Data(format!("{}:{}: expected three paths", path.display(), i + 1)));
        }
        out.push([base.join(parts[0]), base.join(parts[1]), base.join(parts[2])]);
    }
    Ok(out)
}

fn load_pair(paths: &[PathBuf; 3], index: usize) -> Result<FlowPair> {
    let name = |e: FormatError| CliError::Data(format!("pair {index}: {e}"));
    let pair = FlowPair {
        i1: formats::read_pgm(&paths[0]).map_err(name)?,
        i2: formats::read_pgm(&paths[1]).map_err(name)?,
        flow: formats::read_flo(&paths[2]).map_err(name)?,
    };
    pair.check().map_err(|e| CliError::Data(format!("pair {index}: {e}")))?;
    Ok(pair)
}

fn dataset_build(cfg: &RunConfig, list: &Path, out: &Path) -> Result<()> {
    let entries = read_pair_list(list)?;
    let d = &cfg.dataset;
    let (split, indices): (Split, Vec<usize>) = match d.split {
        SplitChoice::All => (Split::Train, (0..entries.len()).collect()),
        SplitChoice::Train => (Split::Train, split_pairs(entries.len(), d.train_fraction, cfg.seed)?.0),
        SplitChoice::Test => (Split::Test, split_pairs(entries.len(), d.train_fraction, cfg.seed)?.1),
    };
    let pairs: Vec<FlowPair> = indices.par_iter().map(|&i| load_pair(&entries[i], i)).collect::<Result<_>>()?;
    let dc = DatasetConfig {
        patch_size: d.patch_size,
        stride: d.stride,
        sample_count: (d.samples > 0).then_some(d.samples),
        seed: cfg.seed,
    };
    let set = build_dataset(&pairs, &dc, split)?;
    formats::save_dataset(&set, out)?;
    eprintln!("{} patches of {}x{} from {} pairs", set.len(), d.patch_size, d.patch_size, pairs.len());
    Ok(())
}

fn model_fit(cfg: &RunConfig, a: &FitArgs) -> Result<()> {
    let family = Family::parse(&a.family).map_err(|e| CliError::Usage(e.to_string()))?;
    if family == Family::Gmm {
        return Err(CliError::Usage("GMMs are trained with `gmm train`".into()));
    }
    let data = formats::load_dataset(&a.data, Split::Train)?;
    let model = fit_baseline(family, &data, &cfg.fit_config())?;
    if let Some(w) = model.ais().and_then(|e| e.warning.as_deref()) {
        eprintln!("warning: {w}");
    }
    save_model(&DensityModel::Baseline(model), &a.out)?;
    Ok(())
}

/// Display names, disambiguated with the file stem when two models share one.
fn model_names(models: &[DensityModel], paths: &[PathBuf]) -> Vec<String> {
    let base: Vec<String> = models.iter().map(|m| m.name()).collect();
    base.iter()
        .zip(paths)
        .map(|(n, p)| {
            if base.iter().filter(|m| *m == n).count() > 1 {
                format!("{n}:{}", p.file_stem().map(|s| s.to_string_lossy()).unwrap_or_default())
            } else {
                n.clone()
            }
        })
        .collect()
}

fn emit(text: &str, out: Option<&Path>) -> Result<()> {
    match out {
        Some(p) => Ok(formats::write_file(p, text.as_bytes())?),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn model_eval(a: &EvalArgs) -> Result<()> {
    let data = formats::load_dataset(&a.data, Split::Test)?;
    let models: Vec<DensityModel> = a.models.iter().map(|p| load_model(p)).collect::<std::result::Result<_, _>>()?;
    let names = model_names(&models, &a.models);
    let rows = models
        .par_iter()
        .zip(names.par_iter())
        .flat_map_iter(|(m, n)| warpcost_core::evaluation::evaluate_models([(n.as_str(), m)], &data).rows)
        .collect();
    emit(&LikelihoodReport::from_rows(rows).to_csv(), a.out.as_deref())
}

fn covariance_of(model: &DensityModel) -> Result<Vec<(f64, nalgebra::DMatrix<f64>)>> {
    use nalgebra::DMatrix;
    match model {
        DensityModel::Gmm(g) => Ok(g.weights().iter().copied().zip(g.covariances().iter().cloned()).collect()),
        DensityModel::Baseline(m) => {
            let n = m.dim();
            match m.family() {
                Family::Bcl2 => Ok(vec![(1.0, DMatrix::identity(n, n) / (2.0 * m.lambda()))]),
                Family::Gcl2 => {
                    let a = m.operator().expect("GCL2 has a transform").to_dense();
                    let prec = (a.transpose() * &a * m.lambda() + DMatrix::identity(n, n) * m.epsilon()) * 2.0;
                    let cov = prec
                        .try_inverse()
                        .ok_or_else(|| CliError::Data("GCL2 precision is singular".into()))?;
                    Ok(vec![(1.0, (&cov + cov.transpose()) * 0.5)])
                }
                f => Err(CliError::Data(format!("{f} has no closed-form covariance; pass --data instead"))),
            }
        }
    }
}

fn model_eig(cfg: &RunConfig, a: &EigArgs) -> Result<()> {
    let comps = match (&a.model, &a.data) {
        (Some(m), None) => covariance_of(&load_model(m)?)?,
        (None, Some(d)) => {
            let set = formats::load_dataset(d, Split::Train)?;
            vec![(1.0, second_moment(&set))]
        }
        _ => return Err(CliError::Usage("model eig needs exactly one of --model or --data".into())),
    };
    let mut csv = String::from("component,weight,leading_count,edge_correlation,largest_eigenvalue,total_variance\n");
    let mut flat_weight = 0.0;
    let mut edges = 0;
    for (j, (w, cov)) in comps.iter().enumerate() {
        let s = eigen_summary(cov, cfg.eig_threshold)?;
        let p = PatchSet::side_for_dim(cov.nrows())?;
        let corr = step_edge_correlation(&s.leading_vectors[0], p);
        if s.leading_count <= 3 {
            flat_weight += w;
        }
        if corr >= 0.7 {
            edges += 1;
        }
        let total: f64 = s.eigenvalues.iter().sum();
        let _ = writeln!(csv, "{j},{w},{},{corr},{},{total}", s.leading_count, s.eigenvalues[0]);
    }
    emit(&csv, a.out.as_deref())?;
    eprintln!("weight in components with <= 3 leading eigenvectors: {flat_weight}; edge-like components: {edges}");
    Ok(())
}

fn second_moment(set: &PatchSet) -> nalgebra::DMatrix<f64> {
    let n = set.dim();
    let x = nalgebra::DMatrixView::from_slice(set.as_flat(), n, set.len());
    let mut m = x * x.transpose();
    m /= set.len().max(1) as f64;
    m
}

fn gmm_train(cfg: &RunConfig, a: &GmmTrainArgs) -> Result<()> {
    let data = formats::load_dataset(&a.data, Split::Train)?;
    let mut gc = cfg.gmm_config();
    if a.full_batch {
        gc.minibatch_size = data.len().max(1);
    }
    let fit = gmm::fit(&data, &gc)?;
    save_model(&DensityModel::Gmm(fit.model), &a.out)?;
    if let Some(t) = &a.trace {
        let mut csv = String::from("epoch,mean_log_likelihood\n");
        for (i, ll) in fit.log_likelihood.iter().enumerate() {
            let _ = writeln!(csv, "{i},{ll}");
        }
        formats::write_file(t, csv.as_bytes())?;
    }
    Ok(())
}

fn flow_estimate(cfg: &RunConfig, a: &EstimateArgs) -> Result<()> {
    let model = load_model(&a.model)?;
    let i1 = formats::read_pgm(&a.i1)?;
    let i2 = formats::read_pgm(&a.i2)?;
    let mut dump_err: Option<FormatError> = None;
    let mut dump = |v: &IterationView<'_>| {
        if let (Some(dir), None) = (&a.dump_dir, &dump_err) {
            let stem = format!("L{}_it{:02}", v.level, v.iter);
            let r1 = formats::write_signed_pgm(v.d_v, &dir.join(format!("{stem}_dv.pgm")), 65535);
            let r2 = formats::write_signed_pgm(v.r, &dir.join(format!("{stem}_r.pgm")), 65535);
            dump_err = r1.and(r2).err();
        }
    };
    let observer: Option<&mut dyn FnMut(&IterationView<'_>)> = if a.dump_dir.is_some() { Some(&mut dump) } else { None };
    let est = estimate_flow_observed(&model, &i1, &i2, &cfg.flow, observer)?;
    if let Some(e) = dump_err {
        return Err(e.into());
    }
    for w in &est.warnings {
        eprintln!("warning: {w}");
    }
    formats::write_flo(&est.flow, &a.out)?;
    if let Some(t) = &a.trace {
        formats::write_file(t, formats::trace_csv(&est.trace).as_bytes())?;
    }
    Ok(())
}

fn flow_bench(cfg: &RunConfig, a: &BenchArgs) -> Result<()> {
    let models: Vec<DensityModel> = a.models.iter().map(|p| load_model(p)).collect::<std::result::Result<_, _>>()?;
    let names = model_names(&models, &a.models);
    let entries = read_pair_list(&a.pairs)?;
    let pairs: Vec<std::result::Result<FlowPair, String>> =
        entries.par_iter().enumerate().map(|(i, e)| load_pair(e, i).map_err(|e| e.to_string())).collect();
    let bc = cfg.bench_config();
    let jobs: Vec<(usize, usize)> = (0..models.len()).flat_map(|m| (0..pairs.len()).map(move |p| (m, p))).collect();
    let results: Vec<PairResult> = jobs
        .par_iter()
        .map(|&(m, p)| {
            let aepe = match &pairs[p] {
                Ok(pair) => bench_pair(&models[m], pair, &bc).map_err(|e| e.to_string()),
                Err(e) => Err(e.clone()),
            };
            PairResult { model: names[m].clone(), pair: p, aepe }
        })
        .collect();
    let report = BenchReport::from_results(results);
    for r in &report.per_pair {
        if let Err(e) = &r.aepe {
            eprintln!("warning: {} on pair {}: {e}", r.model, r.pair);
        }
    }
    if let Some(p) = &a.per_pair {
        formats::write_file(p, report.per_pair_csv().as_bytes())?;
    }
    emit(&report.aggregate_csv(), a.out.as_deref())
}

/// Save an image pair and its flow in the layout `dataset build` reads.
pub fn write_pair(pair: &FlowPair, dir: &Path, stem: &str) -> std::result::Result<[PathBuf; 3], FormatError> {
    let paths = [
        dir.join(format!("{stem}_1.pgm")),
        dir.join(format!("{stem}_2.pgm")),
        dir.join(format!("{stem}.flo")),
    ];
    formats::write_pgm(&pair.i1, &paths[0], 65535)?;
    formats::write_pgm(&pair.i2, &paths[1], 65535)?;
    formats::write_flo(&pair.flow, &paths[2])?;
    Ok(paths)
}

/// Write pairs plus a list file referencing them by relative path.
pub fn write_pair_list(pairs: &[FlowPair], dir: &Path, list_name: &str) -> std::result::Result<PathBuf, FormatError> {
    let mut list = String::new();
    for (i, p) in pairs.iter().enumerate() {
        let stem = format!("pair{i:04}");
        write_pair(p, dir, &stem)?;
        let _ = writeln!(list, "{stem}_1.pgm {stem}_2.pgm {stem}.flo");
    }
    let path = dir.join(list_name);
    formats::write_file(&path, list.as_bytes())?;
    Ok(path)
}
