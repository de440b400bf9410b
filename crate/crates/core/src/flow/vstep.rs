//! Linearized brightness-constancy flow update with an IRLS total-variation
//! regularizer, solved by preconditioned conjugate gradients.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};

use crate::error::{bail, Result};
use crate::image::{FlowField, Image};
use crate::math::sqrt;
use crate::warp::warp_with_gradients;

/// Side of the square pixel aggregates of the coarse preconditioner space.
const AGGREGATE: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IrlsConfig {
    pub inner_iterations: usize,
    pub charbonnier_eps: f64,
    /// Relative residual at which CG stops.
    pub cg_tolerance: f64,
    pub max_cg_iterations: usize,
}

impl Default for IrlsConfig {
    fn default() -> Self {
        IrlsConfig { inner_iterations: 3, charbonnier_eps: 1e-3, cg_tolerance: 1e-6, max_cg_iterations: 2000 }
    }
}

impl IrlsConfig {
    pub fn validate(&self) -> Result<()> {
        if self.inner_iterations == 0 {
            bail!(InvalidArgument, "IRLS needs at least one inner iteration");
        }
        if !(self.charbonnier_eps > 0.0) {
            bail!(InvalidArgument, "charbonnier_eps must be positive, got {}", self.charbonnier_eps);
        }
        if !(self.cg_tolerance > 0.0) || self.max_cg_iterations == 0 {
            bail!(InvalidArgument, "CG tolerance and iteration cap must be positive");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct VStepReport {
    pub flow: FlowField,
    /// Relative residual `‖b - Ax‖ / ‖b‖` of the last reweighted system.
    pub residual: f64,
    pub cg_iterations: usize,
    pub warning: Option<String>,
}

/// Minimize `‖(i1 - r) - i2^v‖² + (λ/β) R(v)` around `flow_init` after a
/// single warp and linearization. Returns `flow_init` plus the increment.
pub fn v_step(
    i1: &Image,
    i2: &Image,
    r: &Image,
    flow_init: &FlowField,
    beta: f64,
    lambda_reg: f64,
    irls: &IrlsConfig,
) -> Result<FlowField> {
    v_step_report(i1, i2, r, flow_init, beta, lambda_reg, irls).map(|rep| rep.flow)
}

pub fn v_step_report(
    i1: &Image,
    i2: &Image,
    r: &Image,
    flow_init: &FlowField,
    beta: f64,
    lambda_reg: f64,
    irls: &IrlsConfig,
) -> Result<VStepReport> {
    i1.check_same_size(i2, "v-step images")?;
    i1.check_same_size(r, "split variable")?;
    flow_init.check_matches(i1)?;
    if !(beta > 0.0) || beta.is_infinite() {
        bail!(InvalidArgument, "beta must be positive and finite, got {beta}");
    }
    if !(lambda_reg >= 0.0) || lambda_reg.is_infinite() {
        bail!(InvalidArgument, "lambda_reg must be non-negative and finite, got {lambda_reg}");
    }
    irls.validate()?;
    let wg = warp_with_gradients(i2, flow_init)?;
    let it: Vec<f64> = wg
        .warped
        .image
        .as_slice()
        .iter()
        .zip(i1.as_slice())
        .zip(r.as_slice())
        .map(|((w, a), b)| w - (a - b))
        .collect();
    let sys = Linearized { w: i1.width(), h: i1.height(), ix: wg.dx, iy: wg.dy, it };
    let c = lambda_reg / beta;
    let (du, dv, residual, cg_iterations, warning) =
        if c == 0.0 { sys.pixelwise() } else { sys.irls(flow_init, c, irls) };
    let u: Vec<f64> = flow_init.u().iter().zip(&du).map(|(a, b)| a + b).collect();
    let v: Vec<f64> = flow_init.v().iter().zip(&dv).map(|(a, b)| a + b).collect();
    Ok(VStepReport { flow: FlowField::new(sys.w, sys.h, u, v)?, residual, cg_iterations, warning })
}

type Solution = (Vec<f64>, Vec<f64>, f64, usize, Option<String>);

struct Linearized {
    w: usize,
    h: usize,
    ix: Vec<f64>,
    iy: Vec<f64>,
    /// `i2^w - (i1 - r)`
    it: Vec<f64>,
}

/// Weighted graph Laplacian of the forward-difference edges for one flow
/// component: `hw[i]` couples pixel `i` to `i + 1`, `vw[i]` to `i + w`.
struct EdgeWeights {
    hw: Vec<f64>,
    vw: Vec<f64>,
}

impl EdgeWeights {
    fn new(comp: &[f64], w: usize, h: usize, scale: f64, eps: f64) -> Self {
        let mut hw = vec![0.0; w * h];
        let mut vw = vec![0.0; w * h];
        let weight = |d: f64| scale / sqrt(d * d + eps * eps);
        for y in 0..h {
            for x in 0..w {
                let i = y * w + x;
                if x + 1 < w {
                    hw[i] = weight(comp[i + 1] - comp[i]);
                }
                if y + 1 < h {
                    vw[i] = weight(comp[i + w] - comp[i]);
                }
            }
        }
        EdgeWeights { hw, vw }
    }

    /// `out[i] += Σ_e a_e (x_i - x_j)` over edges touching `i`; `x` and
    /// `out` are read and written with the given interleaving.
    fn apply(&self, x: &[f64], out: &mut [f64], w: usize, comp: usize) {
        let n = self.hw.len();
        for i in 0..n {
            let a = self.hw[i];
            if a != 0.0 {
                let d = a * (x[2 * i + comp] - x[2 * (i + 1) + comp]);
                out[2 * i + comp] += d;
                out[2 * (i + 1) + comp] -= d;
            }
            let a = self.vw[i];
            if a != 0.0 {
                let d = a * (x[2 * i + comp] - x[2 * (i + w) + comp]);
                out[2 * i + comp] += d;
                out[2 * (i + w) + comp] -= d;
            }
        }
    }

    fn degree(&self, w: usize) -> Vec<f64> {
        let n = self.hw.len();
        let mut d = vec![0.0; n];
        for i in 0..n {
            d[i] += self.hw[i] + self.vw[i];
            if self.hw[i] != 0.0 {
                d[i + 1] += self.hw[i];
            }
            if self.vw[i] != 0.0 {
                d[i + w] += self.vw[i];
            }
        }
        d
    }
}

/// Sparse SPD system `(JᵀJ + L_u ⊕ L_v) x = b` on interleaved `(du, dv)`.
struct System<'a> {
    lin: &'a Linearized,
    eu: EdgeWeights,
    ev: EdgeWeights,
}

impl System<'_> {
    fn apply(&self, x: &[f64], out: &mut [f64]) {
        let l = self.lin;
        for i in 0..l.ix.len() {
            let (gx, gy) = (l.ix[i], l.iy[i]);
            let s = gx * x[2 * i] + gy * x[2 * i + 1];
            out[2 * i] = gx * s;
            out[2 * i + 1] = gy * s;
        }
        self.eu.apply(x, out, l.w, 0);
        self.ev.apply(x, out, l.w, 1);
    }
}

/// Additive two-level preconditioner: 2×2 block Jacobi plus an exact solve
/// on piecewise-constant aggregates.
struct Preconditioner {
    blocks: Vec<[f64; 3]>,
    agg: Vec<usize>,
    coarse: Option<nalgebra::Cholesky<f64, nalgebra::Dyn>>,
    n_agg: usize,
}

impl Preconditioner {
    fn new(sys: &System<'_>) -> Self {
        let l = sys.lin;
        let (w, h) = (l.w, l.h);
        let du = sys.eu.degree(w);
        let dv = sys.ev.degree(w);
        let mut blocks = Vec::with_capacity(w * h);
        for i in 0..w * h {
            let a = l.ix[i] * l.ix[i] + du[i];
            let b = l.ix[i] * l.iy[i];
            let c = l.iy[i] * l.iy[i] + dv[i];
            let ridge = 1e-12 * (a + c) + f64::MIN_POSITIVE;
            let (a, c) = (a + ridge, c + ridge);
            let det = a * c - b * b;
            blocks.push([c / det, -b / det, a / det]);
        }
        let ax = w.div_ceil(AGGREGATE);
        let ay = h.div_ceil(AGGREGATE);
        let n_agg = ax * ay;
        let agg: Vec<usize> = (0..w * h).map(|i| (i / w / AGGREGATE) * ax + (i % w) / AGGREGATE).collect();
        let mut cm = DMatrix::<f64>::zeros(2 * n_agg, 2 * n_agg);
        for i in 0..w * h {
            let p = agg[i];
            cm[(2 * p, 2 * p)] += l.ix[i] * l.ix[i];
            cm[(2 * p, 2 * p + 1)] += l.ix[i] * l.iy[i];
            cm[(2 * p + 1, 2 * p)] += l.ix[i] * l.iy[i];
            cm[(2 * p + 1, 2 * p + 1)] += l.iy[i] * l.iy[i];
            for (comp, e) in [(0, &sys.eu), (1, &sys.ev)] {
                for (j, a) in [(i + 1, e.hw[i]), (i + w, e.vw[i])] {
                    if a == 0.0 {
                        continue;
                    }
                    let q = agg[j];
                    if q != p {
                        cm[(2 * p + comp, 2 * p + comp)] += a;
                        cm[(2 * q + comp, 2 * q + comp)] += a;
                        cm[(2 * p + comp, 2 * q + comp)] -= a;
                        cm[(2 * q + comp, 2 * p + comp)] -= a;
                    }
                }
            }
        }
        let scale = (0..2 * n_agg).map(|i| cm[(i, i)]).fold(0.0, f64::max);
        let ridge = 1e-10 * scale + f64::MIN_POSITIVE;
        for i in 0..2 * n_agg {
            cm[(i, i)] += ridge;
        }
        Preconditioner { blocks, agg, coarse: cm.cholesky(), n_agg }
    }

    fn apply(&self, r: &[f64], z: &mut [f64]) {
        for (i, b) in self.blocks.iter().enumerate() {
            let (x, y) = (r[2 * i], r[2 * i + 1]);
            z[2 * i] = b[0] * x + b[1] * y;
            z[2 * i + 1] = b[1] * x + b[2] * y;
        }
        if let Some(ch) = &self.coarse {
            let mut rc = DVector::<f64>::zeros(2 * self.n_agg);
            for (i, &p) in self.agg.iter().enumerate() {
                rc[2 * p] += r[2 * i];
                rc[2 * p + 1] += r[2 * i + 1];
            }
            ch.solve_mut(&mut rc);
            for (i, &p) in self.agg.iter().enumerate() {
                z[2 * i] += rc[2 * p];
                z[2 * i + 1] += rc[2 * p + 1];
            }
        }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Preconditioned CG from the initial guess in `x`. Returns the relative
/// residual and iteration count.
fn pcg(sys: &System<'_>, pre: &Preconditioner, b: &[f64], x: &mut [f64], tol: f64, max_iter: usize) -> (f64, usize) {
    let n = b.len();
    let bnorm = sqrt(dot(b, b));
    if bnorm == 0.0 {
        x.iter_mut().for_each(|v| *v = 0.0);
        return (0.0, 0);
    }
    let mut r = vec![0.0; n];
    sys.apply(x, &mut r);
    for i in 0..n {
        r[i] = b[i] - r[i];
    }
    let mut z = vec![0.0; n];
    pre.apply(&r, &mut z);
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    let mut ap = vec![0.0; n];
    let mut res = sqrt(dot(&r, &r)) / bnorm;
    let mut it = 0;
    while res > tol && it < max_iter {
        sys.apply(&p, &mut ap);
        let pap = dot(&p, &ap);
        if !(pap > 0.0) {
            break;
        }
        let alpha = rz / pap;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        it += 1;
        res = sqrt(dot(&r, &r)) / bnorm;
        pre.apply(&r, &mut z);
        let rz_new = dot(&r, &z);
        let gamma = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + gamma * p[i];
        }
    }
    // Report the true residual rather than the recursively updated one.
    sys.apply(x, &mut ap);
    let true_res = sqrt(b.iter().zip(&ap).map(|(bi, ai)| (bi - ai) * (bi - ai)).sum::<f64>()) / bnorm;
    (true_res, it)
}

impl Linearized {
    /// No regularizer: each pixel's rank-one system is solved by its
    /// pseudo-inverse, giving the normal-flow increment.
    fn pixelwise(&self) -> Solution {
        let n = self.ix.len();
        let mut du = vec![0.0; n];
        let mut dv = vec![0.0; n];
        let mut any = false;
        for i in 0..n {
            let g2 = self.ix[i] * self.ix[i] + self.iy[i] * self.iy[i];
            if g2 > 0.0 {
                any = true;
                du[i] = -self.it[i] * self.ix[i] / g2;
                dv[i] = -self.it[i] * self.iy[i] / g2;
            }
        }
        let warning = (!any).then(|| String::from("image has no gradient and no regularizer; flow left unchanged"));
        (du, dv, 0.0, 0, warning)
    }

    fn irls(&self, flow0: &FlowField, c: f64, cfg: &IrlsConfig) -> Solution {
        let (w, h) = (self.w, self.h);
        let n = w * h;
        let mut x = vec![0.0; 2 * n];
        let mut total_it = 0;
        let mut residual = 0.0;
        let mut u = flow0.u().to_vec();
        let mut v = flow0.v().to_vec();
        let mut b = vec![0.0; 2 * n];
        for _ in 0..cfg.inner_iterations {
            let sys = System {
                lin: self,
                eu: EdgeWeights::new(&u, w, h, 0.5 * c, cfg.charbonnier_eps),
                ev: EdgeWeights::new(&v, w, h, 0.5 * c, cfg.charbonnier_eps),
            };
            let mut base = vec![0.0; 2 * n];
            for i in 0..n {
                base[2 * i] = flow0.u()[i];
                base[2 * i + 1] = flow0.v()[i];
            }
            let mut lb = vec![0.0; 2 * n];
            sys.eu.apply(&base, &mut lb, w, 0);
            sys.ev.apply(&base, &mut lb, w, 1);
            for i in 0..n {
                b[2 * i] = -self.ix[i] * self.it[i] - lb[2 * i];
                b[2 * i + 1] = -self.iy[i] * self.it[i] - lb[2 * i + 1];
            }
            let pre = Preconditioner::new(&sys);
            let (res, it) = pcg(&sys, &pre, &b, &mut x, cfg.cg_tolerance, cfg.max_cg_iterations);
            residual = res;
            total_it += it;
            for i in 0..n {
                u[i] = flow0.u()[i] + x[2 * i];
                v[i] = flow0.v()[i] + x[2 * i + 1];
            }
        }
        let warning = (residual > cfg.cg_tolerance)
            .then(|| alloc::format!("CG stopped at relative residual {residual:.3e}"));
        let du = (0..n).map(|i| x[2 * i]).collect();
        let dv = (0..n).map(|i| x[2 * i + 1]).collect();
        (du, dv, residual, total_it, warning)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::warp::{backward_warp, gradient};

    fn quadratic(w: usize, h: usize, sx: f64, sy: f64) -> Image {
        Image::from_fn(w, h, |x, y| {
            let (x, y) = (x as f64 - sx, y as f64 - sy);
            0.002 * x * x + 0.001 * x * y + 0.0015 * y * y + 0.01 * x - 0.02 * y
        })
    }

    fn textured(w: usize, h: usize, sx: f64, sy: f64) -> Image {
        Image::from_fn(w, h, |x, y| {
            let (x, y) = (x as f64 - sx, y as f64 - sy);
            0.5 + 0.2 * libm::sin(0.5 * x + 0.3 * y) * libm::cos(0.4 * y - 0.1 * x) + 0.1 * libm::sin(0.9 * y)
        })
    }

    #[test]
    fn zero_residual_gives_zero_increment() {
        let i2 = textured(24, 20, 0.0, 0.0);
        let flow = FlowField::constant(24, 20, 0.3, -0.4);
        let i1 = backward_warp(&i2, &flow).unwrap().image;
        let r = Image::zeros(24, 20);
        for lam in [0.0, 0.1] {
            let out = v_step(&i1, &i2, &r, &flow, 1.0, lam, &IrlsConfig::default()).unwrap();
            for (a, b) in out.u().iter().zip(flow.u()).chain(out.v().iter().zip(flow.v())) {
                assert!((a - b).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn pixelwise_matches_normal_flow_oracle() {
        let i1 = quadratic(16, 16, 0.0, 0.0);
        let i2 = quadratic(16, 16, 0.3, -0.2);
        let r = Image::zeros(16, 16);
        let zero = FlowField::zeros(16, 16);
        let out = v_step(&i1, &i2, &r, &zero, 1.0, 0.0, &IrlsConfig::default()).unwrap();
        let (gx, gy) = gradient(&i2).unwrap();
        for y in 0..16 {
            for x in 0..16 {
                let (a, b) = (gx.get(x, y), gy.get(x, y));
                let t = i2.get(x, y) - i1.get(x, y);
                // 2×2 normal equations [a² ab; ab b²] d = -t (a, b), minimum-norm solution.
                let m = nalgebra::Matrix2::new(a * a, a * b, a * b, b * b);
                let rhs = nalgebra::Vector2::new(-t * a, -t * b);
                let d = m.pseudo_inverse(1e-12 * (a * a + b * b)).unwrap() * rhs;
                let (u, v) = out.get(x, y);
                assert!((u - d[0]).abs() < 1e-6 && (v - d[1]).abs() < 1e-6, "{x},{y}");
            }
        }
    }

    #[test]
    fn huge_regularizer_gives_constant_increment() {
        let i1 = textured(32, 28, 0.0, 0.0);
        let i2 = textured(32, 28, 0.4, -0.3);
        let r = Image::zeros(32, 28);
        let f0 = FlowField::zeros(32, 28);
        let out = v_step(&i1, &i2, &r, &f0, 1.0, 1e9, &IrlsConfig::default()).unwrap();
        let (u0, v0) = out.get(0, 0);
        for (u, v) in out.u().iter().zip(out.v()) {
            assert!((u - u0).abs() < 1e-6 && (v - v0).abs() < 1e-6);
        }
        assert!(u0.abs() > 0.05);
    }

    #[test]
    fn final_system_is_solved() {
        let i1 = textured(40, 36, 0.0, 0.0);
        let i2 = textured(40, 36, 0.7, 0.2);
        let r = Image::from_fn(40, 36, |x, y| 0.01 * libm::sin((x * y) as f64));
        let f0 = FlowField::from_fn(40, 36, |x, _| (0.01 * x as f64, 0.0));
        for lam in [0.01, 1.0, 50.0] {
            let rep = v_step_report(&i1, &i2, &r, &f0, 2.0, lam, &IrlsConfig::default()).unwrap();
            assert!(rep.residual <= 1e-6, "{lam}: {}", rep.residual);
            assert!(rep.warning.is_none());
        }
    }

    #[test]
    fn constant_image_without_regularizer_warns() {
        let img = Image::filled(10, 10, 0.5);
        let f0 = FlowField::constant(10, 10, 0.2, 0.1);
        let rep = v_step_report(&img, &img, &Image::zeros(10, 10), &f0, 1.0, 0.0, &IrlsConfig::default()).unwrap();
        assert_eq!(rep.flow, f0);
        assert!(rep.warning.is_some());
    }
}
