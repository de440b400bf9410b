//! Layered synthetic scenes with exact ground-truth flow.
//!
//! A scene is a textured background plus disc and rotated-rectangle
//! occluders, each layer moving by its own similarity transform. Frame 1
//! shows every layer at rest; frame 2 shows the transformed layers with a
//! per-layer brightness offset and independent pixel noise. The flow at a
//! pixel is the motion of the layer visible there in frame 1, so the warp
//! error is flat inside layers and steps at occlusion boundaries.

use alloc::vec::Vec;

use rand::Rng as _;
use rand_distr::{Distribution, Normal, StandardNormal};

use crate::image::{FlowField, Image};
use crate::math::{cos, floor, sin, PI};
use crate::patches::FlowPair;
use crate::rng::{self, Rng};

/// Periodic multi-octave value noise with values in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ValueNoise {
    octaves: Vec<Octave>,
    total: f64,
}

#[derive(Debug, Clone, PartialEq)]
struct Octave {
    spacing: f64,
    amp: f64,
    n: usize,
    grid: Vec<f64>,
}

fn smooth(t: f64) -> f64 {
    t * t * (3.0 - 2.0 * t)
}

impl ValueNoise {
    /// Octaves given as `(lattice spacing, amplitude)`. Each lattice wraps
    /// after `period / spacing` cells, so the texture has period `period`
    /// whenever the spacings divide it.
    pub fn new(period: f64, octaves: &[(f64, f64)], rng: &mut Rng) -> Self {
        let octaves: Vec<Octave> = octaves
            .iter()
            .map(|&(spacing, amp)| {
                let n = ((period / spacing) as usize).max(2);
                let grid = (0..n * n).map(|_| rng.random::<f64>()).collect();
                Octave { spacing, amp, n, grid }
            })
            .collect();
        let total = octaves.iter().map(|o| o.amp).sum::<f64>().max(f64::MIN_POSITIVE);
        ValueNoise { octaves, total }
    }

    /// Default four-octave texture.
    pub fn standard(period: f64, rng: &mut Rng) -> Self {
        Self::new(period, &[(32.0, 0.45), (16.0, 0.3), (8.0, 0.15), (4.0, 0.1)], rng)
    }

    pub fn eval(&self, x: f64, y: f64) -> f64 {
        let mut s = 0.0;
        for o in &self.octaves {
            let (gx, gy) = (x / o.spacing, y / o.spacing);
            let (fx, fy) = (floor(gx), floor(gy));
            let (tx, ty) = (smooth(gx - fx), smooth(gy - fy));
            let n = o.n as i64;
            let ix = (fx as i64).rem_euclid(n) as usize;
            let iy = (fy as i64).rem_euclid(n) as usize;
            let (jx, jy) = ((ix + 1) % o.n, (iy + 1) % o.n);
            let g = |a: usize, b: usize| o.grid[b * o.n + a];
            let top = g(ix, iy) + tx * (g(jx, iy) - g(ix, iy));
            let bottom = g(ix, jy) + tx * (g(jx, jy) - g(ix, jy));
            s += o.amp * (top + ty * (bottom - top));
        }
        s / self.total
    }
}

/// Similarity motion `p ↦ c + s R(θ) (p - c) + t` of a layer.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Motion {
    pub center: (f64, f64),
    pub angle: f64,
    pub scale: f64,
    pub translation: (f64, f64),
}

impl Motion {
    pub fn translation(du: f64, dv: f64) -> Self {
        Motion { center: (0.0, 0.0), angle: 0.0, scale: 1.0, translation: (du, dv) }
    }

    pub fn rotation(center: (f64, f64), angle: f64) -> Self {
        Motion { center, angle, scale: 1.0, translation: (0.0, 0.0) }
    }

    pub fn apply(&self, x: f64, y: f64) -> (f64, f64) {
        let (c, s) = (cos(self.angle) * self.scale, sin(self.angle) * self.scale);
        let (dx, dy) = (x - self.center.0, y - self.center.1);
        (self.center.0 + c * dx - s * dy + self.translation.0, self.center.1 + s * dx + c * dy + self.translation.1)
    }

    pub fn invert(&self, x: f64, y: f64) -> (f64, f64) {
        let (dx, dy) = (x - self.center.0 - self.translation.0, y - self.center.1 - self.translation.1);
        let (c, s) = (cos(self.angle) / self.scale, sin(self.angle) / self.scale);
        (self.center.0 + c * dx + s * dy, self.center.1 - s * dx + c * dy)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Shape {
    Everywhere,
    Disc { center: (f64, f64), radius: f64 },
    /// Rectangle with half extents `(a, b)` rotated by `angle`.
    Rect { center: (f64, f64), half: (f64, f64), angle: f64 },
}

impl Shape {
    pub fn contains(&self, x: f64, y: f64) -> bool {
        match *self {
            Shape::Everywhere => true,
            Shape::Disc { center, radius } => {
                let (dx, dy) = (x - center.0, y - center.1);
                dx * dx + dy * dy <= radius * radius
            }
            Shape::Rect { center, half, angle } => {
                let (dx, dy) = (x - center.0, y - center.1);
                let (c, s) = (cos(angle), sin(angle));
                (c * dx + s * dy).abs() <= half.0 && (-s * dx + c * dy).abs() <= half.1
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    pub shape: Shape,
    pub texture: ValueNoise,
    pub base: f64,
    pub contrast: f64,
    pub motion: Motion,
    /// Additive intensity change of the layer in frame 2.
    pub brightness: f64,
}

impl Layer {
    fn intensity(&self, x: f64, y: f64) -> f64 {
        self.base + self.contrast * (self.texture.eval(x, y) - 0.5)
    }
}

/// Layers listed bottom first.
#[derive(Debug, Clone, PartialEq)]
pub struct Scene {
    pub width: usize,
    pub height: usize,
    pub layers: Vec<Layer>,
}

impl Scene {
    fn top_in_frame1(&self, x: f64, y: f64) -> Option<&Layer> {
        self.layers.iter().rev().find(|l| l.shape.contains(x, y))
    }

    /// Render both frames and the ground-truth flow; `noise_std` is the
    /// per-pixel Gaussian noise added to each frame.
    pub fn render(&self, noise_std: f64, seed: u64) -> FlowPair {
        let (w, h) = (self.width, self.height);
        let mut n1 = rng::stream(seed, 1);
        let mut n2 = rng::stream(seed, 2);
        let noise = |r: &mut Rng| if noise_std > 0.0 { noise_std * r.sample::<f64, _>(StandardNormal) } else { 0.0 };
        let mut flow_u = Vec::with_capacity(w * h);
        let mut flow_v = Vec::with_capacity(w * h);
        let mut f1 = Vec::with_capacity(w * h);
        for y in 0..h {
            for x in 0..w {
                let (px, py) = (x as f64, y as f64);
                let (val, (u, v)) = match self.top_in_frame1(px, py) {
                    Some(l) => {
                        let (qx, qy) = l.motion.apply(px, py);
                        (l.intensity(px, py), (qx - px, qy - py))
                    }
                    None => (0.0, (0.0, 0.0)),
                };
                f1.push((val + noise(&mut n1)).clamp(0.0, 1.0));
                flow_u.push(u);
                flow_v.push(v);
            }
        }
        let mut f2 = Vec::with_capacity(w * h);
        for y in 0..h {
            for x in 0..w {
                let (qx, qy) = (x as f64, y as f64);
                let mut val = 0.0;
                for l in self.layers.iter().rev() {
                    let (px, py) = l.motion.invert(qx, qy);
                    if l.shape.contains(px, py) {
                        val = l.intensity(px, py) + l.brightness;
                        break;
                    }
                }
                f2.push((val + noise(&mut n2)).clamp(0.0, 1.0));
            }
        }
        FlowPair {
            i1: Image::new(w, h, f1).expect("valid frame"),
            i2: Image::new(w, h, f2).expect("valid frame"),
            flow: FlowField::new(w, h, flow_u, flow_v).expect("finite flow"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SceneConfig {
    pub width: usize,
    pub height: usize,
    pub min_occluders: usize,
    pub max_occluders: usize,
    /// Bound on each translation component, pixels.
    pub max_translation: f64,
    pub max_rotation_deg: f64,
    /// Bound on `|scale - 1|`.
    pub max_scale_change: f64,
    pub noise_std: f64,
    /// Standard deviation of the per-layer frame-2 brightness offset.
    pub brightness_std: f64,
}

impl Default for SceneConfig {
    fn default() -> Self {
        SceneConfig {
            width: 128,
            height: 128,
            min_occluders: 1,
            max_occluders: 4,
            max_translation: 3.0,
            max_rotation_deg: 2.0,
            max_scale_change: 0.02,
            noise_std: 0.002,
            brightness_std: 0.03,
        }
    }
}

fn uniform(rng: &mut Rng, lo: f64, hi: f64) -> f64 {
    lo + (hi - lo) * rng.random::<f64>()
}

fn random_motion(cfg: &SceneConfig, center: (f64, f64), rng: &mut Rng) -> Motion {
    let t = cfg.max_translation;
    let a = cfg.max_rotation_deg * PI / 180.0;
    let s = cfg.max_scale_change;
    Motion {
        center,
        angle: uniform(rng, -a, a),
        scale: 1.0 + uniform(rng, -s, s),
        translation: (uniform(rng, -t, t), uniform(rng, -t, t)),
    }
}

/// Random layered scene, deterministic in `seed`.
pub fn random_scene(cfg: &SceneConfig, seed: u64) -> Scene {
    let mut rng = rng::stream(seed, 0);
    let (w, h) = (cfg.width as f64, cfg.height as f64);
    let period = 256.0f64.max(2.0 * w.max(h));
    let bright = Normal::new(0.0, cfg.brightness_std.max(0.0)).expect("finite std");
    let mut layers = Vec::new();
    layers.push(Layer {
        shape: Shape::Everywhere,
        texture: ValueNoise::standard(period, &mut rng),
        base: uniform(&mut rng, 0.3, 0.7),
        contrast: uniform(&mut rng, 1.2, 2.0),
        motion: random_motion(cfg, (w / 2.0, h / 2.0), &mut rng),
        brightness: bright.sample(&mut rng),
    });
    let span = cfg.max_occluders.saturating_sub(cfg.min_occluders) + 1;
    let count = cfg.min_occluders + rng.random_range(0..span);
    for _ in 0..count {
        let center = (uniform(&mut rng, 0.1 * w, 0.9 * w), uniform(&mut rng, 0.1 * h, 0.9 * h));
        let size = w.min(h);
        let shape = if rng.random::<bool>() {
            Shape::Disc { center, radius: uniform(&mut rng, 0.08 * size, 0.25 * size) }
        } else {
            Shape::Rect {
                center,
                half: (uniform(&mut rng, 0.06 * size, 0.25 * size), uniform(&mut rng, 0.06 * size, 0.25 * size)),
                angle: uniform(&mut rng, 0.0, PI),
            }
        };
        layers.push(Layer {
            shape,
            texture: ValueNoise::standard(period, &mut rng),
            base: uniform(&mut rng, 0.2, 0.8),
            contrast: uniform(&mut rng, 1.0, 1.8),
            motion: random_motion(cfg, center, &mut rng),
            brightness: bright.sample(&mut rng),
        });
    }
    Scene { width: cfg.width, height: cfg.height, layers }
}

/// A rendered random scene (frame noise seeded from the same `seed`).
pub fn scene_pair(cfg: &SceneConfig, seed: u64) -> FlowPair {
    random_scene(cfg, seed).render(cfg.noise_std, seed ^ 0x6e6f_6973_65)
}

fn single_layer(width: usize, height: usize, motion: Motion, seed: u64) -> Scene {
    let mut rng = rng::stream(seed, 0);
    let period = 256.0f64.max(2.0 * width.max(height) as f64);
    Scene {
        width,
        height,
        layers: alloc::vec![Layer {
            shape: Shape::Everywhere,
            texture: ValueNoise::standard(period, &mut rng),
            base: 0.5,
            contrast: 1.6,
            motion,
            brightness: 0.0,
        }],
    }
}

/// A single textured plane translated by `(du, dv)`.
pub fn translation_pair(width: usize, height: usize, du: f64, dv: f64, noise_std: f64, seed: u64) -> FlowPair {
    single_layer(width, height, Motion::translation(du, dv), seed).render(noise_std, seed ^ 1)
}

/// A single textured plane rotated by `angle_deg` about the image centre.
pub fn rotation_pair(width: usize, height: usize, angle_deg: f64, noise_std: f64, seed: u64) -> FlowPair {
    let c = ((width as f64 - 1.0) / 2.0, (height as f64 - 1.0) / 2.0);
    single_layer(width, height, Motion::rotation(c, angle_deg * PI / 180.0), seed).render(noise_std, seed ^ 1)
}

/// `count` independent occlusion scenes with consecutive seeds.
pub fn scene_pairs(cfg: &SceneConfig, count: usize, seed: u64) -> Vec<FlowPair> {
    (0..count as u64).map(|i| scene_pair(cfg, seed.wrapping_add(i))).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::warp::warp_error;

    #[test]
    fn value_noise_is_bounded_and_periodic() {
        let t = ValueNoise::standard(64.0, &mut rng::seeded(3));
        for i in 0..500 {
            let (x, y) = (i as f64 * 0.37, i as f64 * 1.13);
            let v = t.eval(x, y);
            assert!((0.0..=1.0).contains(&v));
            assert!((v - t.eval(x + 64.0, y - 128.0)).abs() < 1e-12);
        }
    }

    #[test]
    fn motion_inverse() {
        let m = Motion { center: (3.0, -2.0), angle: 0.3, scale: 1.05, translation: (1.5, 0.25) };
        let (x, y) = m.apply(7.0, 11.0);
        let (a, b) = m.invert(x, y);
        assert!((a - 7.0).abs() < 1e-12 && (b - 11.0).abs() < 1e-12);
    }

    #[test]
    fn translation_ground_truth_is_exact_for_integer_shifts() {
        let p = translation_pair(40, 30, 2.0, -1.0, 0.0, 5);
        let d = warp_error(&p.i1, &p.i2, &p.flow).unwrap();
        for (i, (&e, &ok)) in d.image.as_slice().iter().zip(&d.valid).enumerate() {
            if ok {
                assert!(e.abs() < 1e-12, "pixel {i}: {e}");
            }
        }
    }

    #[test]
    fn scenes_are_deterministic_and_varied() {
        let cfg = SceneConfig { width: 48, height: 40, ..SceneConfig::default() };
        assert_eq!(scene_pair(&cfg, 9), scene_pair(&cfg, 9));
        assert_ne!(scene_pair(&cfg, 9).i1, scene_pair(&cfg, 10).i1);
        let p = scene_pair(&cfg, 9);
        assert!(p.i1.as_slice().iter().all(|v| (0.0..=1.0).contains(v)));
        let max = p.flow.u().iter().chain(p.flow.v()).fold(0.0f64, |m, v| m.max(v.abs()));
        assert!(max > 0.0 && max < 10.0);
    }
}
