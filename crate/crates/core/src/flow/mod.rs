//! EPLL data cost and coarse-to-fine flow estimation by half-quadratic
//! splitting.
//!
//! At a fixed penalty `β` the split objective
//! `β‖d_v - r‖² - Σ_i log p(P_i r) + λ R(v)` is decreased alternately in the
//! auxiliary image `r` (patch-prior denoising) and in the flow `v`
//! (linearized brightness constancy with an IRLS total-variation term).
//! Both steps are safeguarded so the objective never increases within a
//! fixed-`β` block.

mod cost;
mod rstep;
mod vstep;

use alloc::string::String;
use alloc::vec::Vec;

pub use cost::{epll_cost, epll_cost_with_stride, patch_neg_log_likelihood, regularizer, split_cost};
pub use rstep::{denoise_image, r_step, r_step_with_stride};
pub use vstep::{v_step, v_step_report, IrlsConfig, VStepReport};

use crate::error::{bail, Result};
use crate::image::{FlowField, Image};
use crate::models::DensityModel;
use crate::pyramid::{upscale_flow, Pyramid};
use crate::warp::warp_error;
use cost::sq_dist;

/// Step fractions tried when a full r-step would raise the split cost.
const R_BACKTRACK: usize = 3;
/// Halvings tried when a full v-step would raise the split cost.
const V_BACKTRACK: usize = 6;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FlowConfig {
    /// Weight of the total-variation flow regularizer.
    pub lambda_reg: f64,
    pub beta0: f64,
    pub beta_growth: f64,
    pub beta_max: f64,
    pub iterations_per_level: usize,
    pub pyramid_scale: f64,
    pub min_dim: usize,
    pub irls: IrlsConfig,
    /// Patch grid stride for the EPLL terms.
    pub stride: usize,
    /// v-step-only iterations (with `r = 0`) at the coarsest level.
    pub warm_start_iterations: usize,
    /// Record the EPLL cost alongside the split cost (one extra model
    /// evaluation per iteration).
    pub trace_epll: bool,
}

impl Default for FlowConfig {
    fn default() -> Self {
        FlowConfig {
            lambda_reg: 300.0,
            beta0: 100.0,
            beta_growth: 1.6,
            beta_max: 1e6,
            iterations_per_level: 20,
            pyramid_scale: 0.5,
            min_dim: 16,
            irls: IrlsConfig::default(),
            stride: 1,
            warm_start_iterations: 10,
            trace_epll: true,
        }
    }
}

impl FlowConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lambda_reg >= 0.0) || self.lambda_reg.is_infinite() {
            bail!(InvalidArgument, "lambda_reg must be non-negative and finite, got {}", self.lambda_reg);
        }
        if !(self.beta0 > 0.0) || self.beta0.is_infinite() {
            bail!(InvalidArgument, "beta0 must be positive and finite, got {}", self.beta0);
        }
        if !(self.beta_growth >= 1.0) || self.beta_growth.is_infinite() {
            bail!(InvalidArgument, "beta growth must be at least 1, got {}", self.beta_growth);
        }
        if !(self.beta_max >= self.beta0) || self.beta_max.is_infinite() {
            bail!(InvalidArgument, "beta_max must be finite and at least beta0");
        }
        if self.iterations_per_level == 0 {
            bail!(InvalidArgument, "iterations_per_level must be at least 1");
        }
        if self.stride == 0 {
            bail!(InvalidArgument, "patch stride must be positive");
        }
        self.irls.validate()
    }

    /// `β` used in iteration `t` (0-based) of every level.
    pub fn beta_at(&self, t: usize) -> f64 {
        let mut b = self.beta0;
        for _ in 0..t {
            b *= self.beta_growth;
            if b >= self.beta_max {
                return self.beta_max;
            }
        }
        b.min(self.beta_max)
    }
}

/// Where in an iteration a cost record was taken.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    Start,
    AfterR,
    AfterV,
}

impl Stage {
    pub fn as_str(self) -> &'static str {
        match self {
            Stage::Start => "start",
            Stage::AfterR => "r",
            Stage::AfterV => "v",
        }
    }

    pub fn parse(s: &str) -> Option<Stage> {
        match s {
            "start" => Some(Stage::Start),
            "r" => Some(Stage::AfterR),
            "v" => Some(Stage::AfterV),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CostRecord {
    /// Pyramid level, 0 = coarsest.
    pub level: usize,
    pub iter: usize,
    pub stage: Stage,
    pub beta: f64,
    pub split_cost: f64,
    /// NaN when EPLL tracing is disabled.
    pub epll_cost: f64,
}

/// Splitting state of one pyramid level.
#[derive(Debug, Clone, PartialEq)]
pub struct HqsState {
    pub flow: FlowField,
    pub r: Image,
    pub beta: f64,
    pub cost_trace: Vec<CostRecord>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FlowEstimate {
    pub flow: FlowField,
    /// All levels' records, coarsest level first.
    pub trace: Vec<CostRecord>,
    pub warnings: Vec<String>,
}

/// Cached pieces of the split objective at the current `(v, r)`.
struct Terms {
    d: Image,
    prior_r: f64,
    reg: f64,
    epll: f64,
}

impl Terms {
    fn split(&self, r: &Image, beta: f64, lambda: f64) -> f64 {
        beta * sq_dist(&self.d, r) + self.prior_r + lambda * self.reg
    }
}

/// Snapshot handed to an observer after every r/v iteration.
pub struct IterationView<'a> {
    pub level: usize,
    pub iter: usize,
    /// Warp error at the current flow.
    pub d_v: &'a Image,
    pub r: &'a Image,
    pub flow: &'a FlowField,
}

struct Solver<'a, 'o> {
    model: &'a DensityModel,
    i1: &'a Image,
    i2: &'a Image,
    cfg: &'a FlowConfig,
    warnings: Vec<String>,
    observer: Option<&'o mut dyn FnMut(&IterationView<'_>)>,
}

impl Solver<'_, '_> {
    fn epll(&self, d: &Image, reg: f64) -> Result<f64> {
        if self.cfg.trace_epll {
            Ok(patch_neg_log_likelihood(self.model, d, self.cfg.stride)? + self.cfg.lambda_reg * reg)
        } else {
            Ok(f64::NAN)
        }
    }

    /// A v-step at fixed `r` accepted only if `β‖d_v - r‖² + λR(v)` does not
    /// increase, halving the increment otherwise.
    fn safeguarded_v(&mut self, flow: &mut FlowField, r: &Image, beta: f64, terms: &mut Terms) -> Result<bool> {
        let lam = self.cfg.lambda_reg;
        let rep = v_step_report(self.i1, self.i2, r, flow, beta, lam, &self.cfg.irls)?;
        if let Some(w) = rep.warning {
            self.warnings.push(w);
        }
        let current = beta * sq_dist(&terms.d, r) + lam * terms.reg;
        let mut step = 1.0;
        for _ in 0..=V_BACKTRACK {
            let cand = if step == 1.0 {
                rep.flow.clone()
            } else {
                let u = flow.u().iter().zip(rep.flow.u()).map(|(a, b)| a + step * (b - a)).collect();
                let v = flow.v().iter().zip(rep.flow.v()).map(|(a, b)| a + step * (b - a)).collect();
                FlowField::new(flow.width(), flow.height(), u, v)?
            };
            let d = warp_error(self.i1, self.i2, &cand)?.image;
            let reg = regularizer(&cand);
            let c = beta * sq_dist(&d, r) + lam * reg;
            if c <= current {
                *flow = cand;
                terms.d = d;
                terms.reg = reg;
                return Ok(true);
            }
            step *= 0.5;
        }
        Ok(false)
    }

    /// The denoised image, or a point on the segment towards it, accepted
    /// only if the split cost does not increase.
    fn safeguarded_r(&self, r: &mut Image, beta: f64, terms: &mut Terms) -> Result<()> {
        let lam = self.cfg.lambda_reg;
        let target = r_step_with_stride(self.model, &terms.d, beta, self.cfg.stride)?;
        let current = terms.split(r, beta, lam);
        let mut step = 1.0;
        for _ in 0..=R_BACKTRACK {
            let cand = if step == 1.0 {
                target.clone()
            } else {
                let data = r.as_slice().iter().zip(target.as_slice()).map(|(a, b)| a + step * (b - a)).collect();
                Image::new(r.width(), r.height(), data)?
            };
            let prior = patch_neg_log_likelihood(self.model, &cand, self.cfg.stride)?;
            let c = beta * sq_dist(&terms.d, &cand) + prior + lam * terms.reg;
            if c <= current {
                *r = cand;
                terms.prior_r = prior;
                return Ok(());
            }
            step *= 0.5;
        }
        Ok(())
    }

    fn warm_start(&mut self, flow: &mut FlowField) -> Result<()> {
        let (w, h) = (flow.width(), flow.height());
        let zero = Image::zeros(w, h);
        let d = warp_error(self.i1, self.i2, flow)?.image;
        let mut terms = Terms { d, prior_r: 0.0, reg: regularizer(flow), epll: 0.0 };
        for _ in 0..self.cfg.warm_start_iterations {
            if !self.safeguarded_v(flow, &zero, self.cfg.beta0, &mut terms)? {
                break;
            }
        }
        Ok(())
    }

    fn run_level(&mut self, level: usize, flow: FlowField) -> Result<HqsState> {
        let cfg = self.cfg;
        let lam = cfg.lambda_reg;
        let (w, h) = (flow.width(), flow.height());
        let mut state = HqsState { flow, r: Image::zeros(w, h), beta: cfg.beta0, cost_trace: Vec::new() };
        let d = warp_error(self.i1, self.i2, &state.flow)?.image;
        let reg = regularizer(&state.flow);
        let prior_r = patch_neg_log_likelihood(self.model, &state.r, cfg.stride)?;
        let epll = self.epll(&d, reg)?;
        let mut terms = Terms { d, prior_r, reg, epll };
        for t in 0..cfg.iterations_per_level {
            let beta = cfg.beta_at(t);
            state.beta = beta;
            let record = |stage, terms: &Terms, r: &Image| CostRecord {
                level,
                iter: t,
                stage,
                beta,
                split_cost: terms.split(r, beta, lam),
                epll_cost: terms.epll,
            };
            state.cost_trace.push(record(Stage::Start, &terms, &state.r));
            self.safeguarded_r(&mut state.r, beta, &mut terms)?;
            state.cost_trace.push(record(Stage::AfterR, &terms, &state.r));
            if self.safeguarded_v(&mut state.flow, &state.r, beta, &mut terms)? {
                terms.epll = self.epll(&terms.d, terms.reg)?;
            }
            state.cost_trace.push(record(Stage::AfterV, &terms, &state.r));
            if let Some(obs) = self.observer.as_mut() {
                obs(&IterationView { level, iter: t, d_v: &terms.d, r: &state.r, flow: &state.flow });
            }
        }
        Ok(state)
    }
}

/// Coarse-to-fine flow from `i1` to `i2` under the patch model's EPLL data
/// cost. Each level starts from the upsampled coarser flow and runs
/// `iterations_per_level` r/v alternations with `β` from the schedule.
pub fn estimate_flow(model: &DensityModel, i1: &Image, i2: &Image, config: &FlowConfig) -> Result<FlowEstimate> {
    estimate_flow_observed(model, i1, i2, config, None)
}

/// As [`estimate_flow`], calling `observer` after every iteration.
pub fn estimate_flow_observed(
    model: &DensityModel,
    i1: &Image,
    i2: &Image,
    config: &FlowConfig,
    mut observer: Option<&mut dyn FnMut(&IterationView<'_>)>,
) -> Result<FlowEstimate> {
    config.validate()?;
    i1.check_same_size(i2, "flow images")?;
    cost::model_patch_size(model)?;
    let p1 = Pyramid::build(i1, config.pyramid_scale, config.min_dim)?;
    let p2 = Pyramid::build(i2, config.pyramid_scale, config.min_dim)?;
    let mut trace = Vec::new();
    let mut warnings = Vec::new();
    let mut flow: Option<FlowField> = None;
    for (level, (a, b)) in p1.levels.iter().zip(&p2.levels).enumerate() {
        let (w, h) = (a.image.width(), a.image.height());
        let mut solver = Solver {
            model,
            i1: &a.image,
            i2: &b.image,
            cfg: config,
            warnings: Vec::new(),
            observer: observer.as_mut().map(|o| &mut **o as &mut dyn FnMut(&IterationView<'_>)),
        };
        let start = match flow.take() {
            Some(f) => upscale_flow(&f, w, h),
            None => {
                let mut f = FlowField::zeros(w, h);
                solver.warm_start(&mut f)?;
                f
            }
        };
        let state = solver.run_level(level, start)?;
        warnings.append(&mut solver.warnings);
        trace.extend(state.cost_trace);
        flow = Some(state.flow);
    }
    Ok(FlowEstimate { flow: flow.expect("pyramid has a level"), trace, warnings })
}

/// Average end-point error over all pixels or over those where `mask` is true.
pub fn aepe(estimated: &FlowField, ground_truth: &FlowField, mask: Option<&[bool]>) -> Result<f64> {
    if estimated.width() != ground_truth.width() || estimated.height() != ground_truth.height() {
        bail!(
            DimensionMismatch,
            "estimated flow is {}x{}, ground truth {}x{}",
            estimated.width(),
            estimated.height(),
            ground_truth.width(),
            ground_truth.height()
        );
    }
    if let Some(m) = mask {
        if m.len() != estimated.len() {
            bail!(DimensionMismatch, "mask has {} entries for {} pixels", m.len(), estimated.len());
        }
    }
    let mut total = 0.0;
    let mut count = 0usize;
    for i in 0..estimated.len() {
        if mask.is_some_and(|m| !m[i]) {
            continue;
        }
        let du = estimated.u()[i] - ground_truth.u()[i];
        let dv = estimated.v()[i] - ground_truth.v()[i];
        total += crate::math::sqrt(du * du + dv * dv);
        count += 1;
    }
    if count == 0 {
        return Err(crate::Error::Empty("AEPE mask selects no pixels"));
    }
    Ok(total / count as f64)
}

/// Mask of pixels at least `margin` away from every border.
pub fn interior_mask(width: usize, height: usize, margin: usize) -> Vec<bool> {
    (0..width * height)
        .map(|i| {
            let (x, y) = (i % width, i / width);
            x >= margin && y >= margin && x + margin < width && y + margin < height
        })
        .collect()
}
