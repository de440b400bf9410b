//! Run configuration: flat `key = value` text with every key defaulted.

use std::fmt::Write as _;
use std::path::Path;
use std::str::FromStr;

use warpcost_core::ais::AisConfig;
use warpcost_core::evaluation::BenchConfig;
use warpcost_core::flow::FlowConfig;
use warpcost_core::gmm::GmmConfig;
use warpcost_core::models::{FitConfig, SampleConfig};
use warpcost_core::patches::DEFAULT_TRAIN_FRACTION;

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum ConfigError {
    #[error("unknown config key {0:?}")]
    UnknownKey(String),
    #[error("bad value {value:?} for {key}: {reason}")]
    BadValue { key: String, value: String, reason: String },
    #[error("{path}:{line}: {message}")]
    Syntax { path: String, line: usize, message: String },
    #[error("cannot read config {path}: {message}")]
    Io { path: String, message: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SplitChoice {
    All,
    Train,
    Test,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DatasetSettings {
    pub patch_size: usize,
    pub stride: usize,
    /// 0 keeps every patch.
    pub samples: usize,
    pub split: SplitChoice,
    pub train_fraction: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub seed: u64,
    /// 0 = one worker per core.
    pub threads: usize,
    pub dataset: DatasetSettings,
    pub gmm: GmmConfig,
    pub fit: FitConfig,
    pub sample: SampleConfig,
    pub flow: FlowConfig,
    pub bench_margin: usize,
    pub eig_threshold: f64,
    pub grid_rows: usize,
    pub grid_cols: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seed: 0,
            threads: 0,
            dataset: DatasetSettings {
                patch_size: 8,
                stride: 8,
                samples: 0,
                split: SplitChoice::All,
                train_fraction: DEFAULT_TRAIN_FRACTION,
            },
            gmm: GmmConfig::default(),
            fit: FitConfig::default(),
            sample: SampleConfig::default(),
            flow: FlowConfig::default(),
            bench_margin: BenchConfig::default().margin,
            eig_threshold: 0.95,
            grid_rows: 10,
            grid_cols: 10,
        }
    }
}

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T, ConfigError>
where
    T::Err: std::fmt::Display,
{
    value.trim().parse::<T>().map_err(|e| ConfigError::BadValue {
        key: key.into(),
        value: value.into(),
        reason: e.to_string(),
    })
}

fn parse_bool(key: &str, value: &str) -> Result<bool, ConfigError> {
    match value.trim() {
        "true" | "1" | "yes" => Ok(true),
        "false" | "0" | "no" => Ok(false),
        _ => Err(ConfigError::BadValue { key: key.into(), value: value.into(), reason: "expected true or false".into() }),
    }
}

/// Every key in file order, with the rendering of its current value.
macro_rules! keys {
    ($($key:literal => $field:expr),* $(,)?) => {
        pub const KEYS: &[&str] = &[$($key),*];

        fn render(cfg: &RunConfig, key: &str) -> Option<String> {
            let c = cfg;
            match key {
                $($key => Some(($field)(c)),)*
                _ => None,
            }
        }
    };
}

fn ais(c: &AisConfig) -> [String; 6] {
    [
        c.n_chains.to_string(),
        c.n_temps.to_string(),
        c.leapfrog_steps.to_string(),
        c.step_size.to_string(),
        c.pilot_chains.to_string(),
        c.target_acceptance.to_string(),
    ]
}

keys! {
    "seed" => |c: &RunConfig| c.seed.to_string(),
    "threads" => |c: &RunConfig| c.threads.to_string(),
    "dataset.patch_size" => |c: &RunConfig| c.dataset.patch_size.to_string(),
    "dataset.stride" => |c: &RunConfig| c.dataset.stride.to_string(),
    "dataset.samples" => |c: &RunConfig| c.dataset.samples.to_string(),
    "dataset.split" => |c: &RunConfig| match c.dataset.split {
        SplitChoice::All => "all".to_string(),
        SplitChoice::Train => "train".to_string(),
        SplitChoice::Test => "test".to_string(),
    },
    "dataset.train_fraction" => |c: &RunConfig| c.dataset.train_fraction.to_string(),
    "gmm.k" => |c: &RunConfig| c.gmm.k.to_string(),
    "gmm.minibatch" => |c: &RunConfig| c.gmm.minibatch_size.to_string(),
    "gmm.epochs" => |c: &RunConfig| c.gmm.epochs.to_string(),
    "gmm.cov_floor" => |c: &RunConfig| c.gmm.cov_floor.to_string(),
    "gmm.weight_floor" => |c: &RunConfig| c.gmm.weight_floor.map_or("auto".to_string(), |w| w.to_string()),
    "gmm.step_exponent" => |c: &RunConfig| c.gmm.step_exponent.to_string(),
    "gmm.kmeans_iters" => |c: &RunConfig| c.gmm.kmeans_iters.to_string(),
    "ais.chains" => |c: &RunConfig| ais(&c.fit.ais)[0].clone(),
    "ais.temps" => |c: &RunConfig| ais(&c.fit.ais)[1].clone(),
    "ais.leapfrog" => |c: &RunConfig| ais(&c.fit.ais)[2].clone(),
    "ais.step" => |c: &RunConfig| ais(&c.fit.ais)[3].clone(),
    "ais.pilot_chains" => |c: &RunConfig| ais(&c.fit.ais)[4].clone(),
    "ais.target_acceptance" => |c: &RunConfig| ais(&c.fit.ais)[5].clone(),
    "fit.search_chains" => |c: &RunConfig| c.fit.search.n_chains.to_string(),
    "fit.search_temps" => |c: &RunConfig| c.fit.search.n_temps.to_string(),
    "fit.grid_points" => |c: &RunConfig| c.fit.grid_points.to_string(),
    "fit.grid_span" => |c: &RunConfig| c.fit.grid_span.to_string(),
    "fit.golden_iters" => |c: &RunConfig| c.fit.golden_iters.to_string(),
    "sample.chains" => |c: &RunConfig| c.sample.chains.to_string(),
    "sample.burn_in" => |c: &RunConfig| c.sample.burn_in.to_string(),
    "sample.thin" => |c: &RunConfig| c.sample.thin.to_string(),
    "sample.leapfrog" => |c: &RunConfig| c.sample.leapfrog_steps.to_string(),
    "flow.lambda" => |c: &RunConfig| c.flow.lambda_reg.to_string(),
    "flow.beta0" => |c: &RunConfig| c.flow.beta0.to_string(),
    "flow.beta_growth" => |c: &RunConfig| c.flow.beta_growth.to_string(),
    "flow.beta_max" => |c: &RunConfig| c.flow.beta_max.to_string(),
    "flow.iterations" => |c: &RunConfig| c.flow.iterations_per_level.to_string(),
    "flow.scale" => |c: &RunConfig| c.flow.pyramid_scale.to_string(),
    "flow.min_dim" => |c: &RunConfig| c.flow.min_dim.to_string(),
    "flow.irls_iterations" => |c: &RunConfig| c.flow.irls.inner_iterations.to_string(),
    "flow.charbonnier_eps" => |c: &RunConfig| c.flow.irls.charbonnier_eps.to_string(),
    "flow.cg_tolerance" => |c: &RunConfig| c.flow.irls.cg_tolerance.to_string(),
    "flow.cg_max_iterations" => |c: &RunConfig| c.flow.irls.max_cg_iterations.to_string(),
    "flow.stride" => |c: &RunConfig| c.flow.stride.to_string(),
    "flow.warm_start" => |c: &RunConfig| c.flow.warm_start_iterations.to_string(),
    "flow.trace_epll" => |c: &RunConfig| c.flow.trace_epll.to_string(),
    "bench.margin" => |c: &RunConfig| c.bench_margin.to_string(),
    "eig.threshold" => |c: &RunConfig| c.eig_threshold.to_string(),
    "grid.rows" => |c: &RunConfig| c.grid_rows.to_string(),
    "grid.cols" => |c: &RunConfig| c.grid_cols.to_string(),
}

impl RunConfig {
    pub fn get(&self, key: &str) -> Option<String> {
        render(self, key)
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<(), ConfigError> {
        let v = value;
        match key {
            "seed" => self.seed = parse(key, v)?,
            "threads" => self.threads = parse(key, v)?,
            "dataset.patch_size" => self.dataset.patch_size = parse(key, v)?,
            "dataset.stride" => self.dataset.stride = parse(key, v)?,
            "dataset.samples" => self.dataset.samples = parse(key, v)?,
            "dataset.split" => {
                self.dataset.split = match v.trim() {
                    "all" => SplitChoice::All,
                    "train" => SplitChoice::Train,
                    "test" => SplitChoice::Test,
                    _ => {
                        return Err(ConfigError::BadValue {
                            key: key.into(),
                            value: v.into(),
                            reason: "expected all, train or test".into(),
                        })
                    }
                }
            }
            "dataset.train_fraction" => self.dataset.train_fraction = parse(key, v)?,
            "gmm.k" => self.gmm.k = parse(key, v)?,
            "gmm.minibatch" => self.gmm.minibatch_size = parse(key, v)?,
            "gmm.epochs" => self.gmm.epochs = parse(key, v)?,
            "gmm.cov_floor" => self.gmm.cov_floor = parse(key, v)?,
            "gmm.weight_floor" => {
                self.gmm.weight_floor = if v.trim() == "auto" { None } else { Some(parse(key, v)?) }
            }
            "gmm.step_exponent" => self.gmm.step_exponent = parse(key, v)?,
            "gmm.kmeans_iters" => self.gmm.kmeans_iters = parse(key, v)?,
            "ais.chains" => self.fit.ais.n_chains = parse(key, v)?,
            "ais.temps" => self.fit.ais.n_temps = parse(key, v)?,
            "ais.leapfrog" => self.fit.ais.leapfrog_steps = parse(key, v)?,
            "ais.step" => self.fit.ais.step_size = parse(key, v)?,
            "ais.pilot_chains" => self.fit.ais.pilot_chains = parse(key, v)?,
            "ais.target_acceptance" => self.fit.ais.target_acceptance = parse(key, v)?,
            "fit.search_chains" => self.fit.search.n_chains = parse(key, v)?,
            "fit.search_temps" => self.fit.search.n_temps = parse(key, v)?,
            "fit.grid_points" => self.fit.grid_points = parse(key, v)?,
            "fit.grid_span" => self.fit.grid_span = parse(key, v)?,
            "fit.golden_iters" => self.fit.golden_iters = parse(key, v)?,
            "sample.chains" => self.sample.chains = parse(key, v)?,
            "sample.burn_in" => self.sample.burn_in = parse(key, v)?,
            "sample.thin" => self.sample.thin = parse(key, v)?,
            "sample.leapfrog" => self.sample.leapfrog_steps = parse(key, v)?,
            "flow.lambda" => self.flow.lambda_reg = parse(key, v)?,
            "flow.beta0" => self.flow.beta0 = parse(key, v)?,
            "flow.beta_growth" => self.flow.beta_growth = parse(key, v)?,
            "flow.beta_max" => self.flow.beta_max = parse(key, v)?,
            "flow.iterations" => self.flow.iterations_per_level = parse(key, v)?,
            "flow.scale" => self.flow.pyramid_scale = parse(key, v)?,
            "flow.min_dim" => self.flow.min_dim = parse(key, v)?,
            "flow.irls_iterations" => self.flow.irls.inner_iterations = parse(key, v)?,
            "flow.charbonnier_eps" => self.flow.irls.charbonnier_eps = parse(key, v)?,
            "flow.cg_tolerance" => self.flow.irls.cg_tolerance = parse(key, v)?,
            "flow.cg_max_iterations" => self.flow.irls.max_cg_iterations = parse(key, v)?,
            "flow.stride" => self.flow.stride = parse(key, v)?,
            "flow.warm_start" => self.flow.warm_start_iterations = parse(key, v)?,
            "flow.trace_epll" => self.flow.trace_epll = parse_bool(key, v)?,
            "bench.margin" => self.bench_margin = parse(key, v)?,
            "eig.threshold" => self.eig_threshold = parse(key, v)?,
            "grid.rows" => self.grid_rows = parse(key, v)?,
            "grid.cols" => self.grid_cols = parse(key, v)?,
            _ => return Err(ConfigError::UnknownKey(key.into())),
        }
        Ok(())
    }

    /// Apply `key = value` lines; `#` starts a comment.
    pub fn apply_text(&mut self, text: &str, origin: &str) -> Result<(), ConfigError> {
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let syntax = |message: String| ConfigError::Syntax { path: origin.into(), line: i + 1, message };
            let (k, v) = line.split_once('=').ok_or_else(|| syntax("expected key = value".into()))?;
            self.set(k.trim(), v.trim()).map_err(|e| syntax(e.to_string()))?;
        }
        Ok(())
    }

    pub fn apply_file(&mut self, path: &Path) -> Result<(), ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ConfigError::Io { path: path.display().to_string(), message: e.to_string() })?;
        self.apply_text(&text, &path.display().to_string())
    }

    /// All keys with their current values, one `key = value` per line.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for k in KEYS {
            let _ = writeln!(s, "{k} = {}", self.get(k).expect("listed key"));
        }
        s
    }

    /// Core settings with the run seed threaded through.
    pub fn gmm_config(&self) -> GmmConfig {
        GmmConfig { seed: self.seed, ..self.gmm }
    }

    pub fn fit_config(&self) -> FitConfig {
        self.fit.with_seed(self.seed)
    }

    pub fn bench_config(&self) -> BenchConfig {
        BenchConfig { flow: self.flow, margin: self.bench_margin }
    }
}
