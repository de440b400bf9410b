//! Gaussian pyramids and flow resampling between levels.

use alloc::vec::Vec;

use crate::error::{bail, Result};
use crate::image::{FlowField, Image};
use crate::math::{ceil_usize, exp, round};
use crate::warp::sample_bilinear;

#[derive(Debug, Clone, PartialEq)]
pub struct PyramidLevel {
    pub image: Image,
    pub flow: Option<FlowField>,
}

/// Levels ordered coarsest first; the last level is the input resolution.
#[derive(Debug, Clone, PartialEq)]
pub struct Pyramid {
    pub levels: Vec<PyramidLevel>,
    pub scale: f64,
}

impl Pyramid {
    /// Blur with σ = 0.5/scale and resample by `scale` until the next level
    /// would drop below `min_dim` on either axis.
    pub fn build(image: &Image, scale: f64, min_dim: usize) -> Result<Pyramid> {
        Self::build_inner(image, None, scale, min_dim)
    }

    /// As [`Pyramid::build`], also carrying a flow field whose vectors are
    /// rescaled with each level.
    pub fn build_with_flow(image: &Image, flow: &FlowField, scale: f64, min_dim: usize) -> Result<Pyramid> {
        flow.check_matches(image)?;
        Self::build_inner(image, Some(flow), scale, min_dim)
    }

    fn build_inner(image: &Image, flow: Option<&FlowField>, scale: f64, min_dim: usize) -> Result<Pyramid> {
        let sizes = level_sizes(image.width(), image.height(), scale, min_dim)?;
        let sigma = 0.5 / scale;
        let mut levels = Vec::with_capacity(sizes.len());
        levels.push(PyramidLevel { image: image.clone(), flow: flow.cloned() });
        for &(w, h) in sizes.iter().rev().skip(1) {
            let finer = levels.last().unwrap();
            let img = resample(&gaussian_blur(&finer.image, sigma), w, h);
            let fl = finer.flow.as_ref().map(|f| {
                let u = resample(&gaussian_blur(&f.u_image(), sigma), w, h);
                let v = resample(&gaussian_blur(&f.v_image(), sigma), w, h);
                scale_flow(u, v, finer.image.width(), finer.image.height())
            });
            levels.push(PyramidLevel { image: img, flow: fl });
        }
        levels.reverse();
        Ok(Pyramid { levels, scale })
    }

    pub fn len(&self) -> usize {
        self.levels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.levels.is_empty()
    }

    pub fn finest(&self) -> &PyramidLevel {
        self.levels.last().expect("pyramid has at least one level")
    }

    pub fn coarsest(&self) -> &PyramidLevel {
        &self.levels[0]
    }
}

/// Level sizes, coarsest first, following `next = round(dim * scale)`.
pub fn level_sizes(width: usize, height: usize, scale: f64, min_dim: usize) -> Result<Vec<(usize, usize)>> {
    if !(scale > 0.0 && scale < 1.0) {
        bail!(InvalidArgument, "pyramid scale must lie in (0, 1), got {scale}");
    }
    if min_dim < 8 {
        bail!(InvalidArgument, "pyramid min_dim must be at least 8, got {min_dim}");
    }
    let mut sizes = alloc::vec![(width, height)];
    let (mut w, mut h) = (width, height);
    loop {
        let nw = round(w as f64 * scale) as usize;
        let nh = round(h as f64 * scale) as usize;
        if nw < min_dim || nh < min_dim {
            break;
        }
        sizes.push((nw, nh));
        w = nw;
        h = nh;
    }
    sizes.reverse();
    Ok(sizes)
}

fn gaussian_kernel(sigma: f64) -> Vec<f64> {
    let radius = ceil_usize(3.0 * sigma).max(1);
    let mut k: Vec<f64> = (0..=2 * radius)
        .map(|i| {
            let d = i as f64 - radius as f64;
            exp(-0.5 * d * d / (sigma * sigma))
        })
        .collect();
    let s: f64 = k.iter().sum();
    k.iter_mut().for_each(|v| *v /= s);
    k
}

/// Separable Gaussian blur with clamp-to-edge borders.
pub fn gaussian_blur(image: &Image, sigma: f64) -> Image {
    let k = gaussian_kernel(sigma);
    let r = (k.len() / 2) as isize;
    let (w, h) = (image.width() as isize, image.height() as isize);
    let horiz = Image::from_fn(image.width(), image.height(), |x, y| {
        k.iter()
            .enumerate()
            .map(|(i, &kv)| {
                let sx = (x as isize + i as isize - r).clamp(0, w - 1) as usize;
                kv * image.get(sx, y)
            })
            .sum()
    });
    Image::from_fn(image.width(), image.height(), |x, y| {
        k.iter()
            .enumerate()
            .map(|(i, &kv)| {
                let sy = (y as isize + i as isize - r).clamp(0, h - 1) as usize;
                kv * horiz.get(x, sy)
            })
            .sum()
    })
}

/// Bilinear resampling with pixel centres aligned between the two grids.
pub fn resample(image: &Image, width: usize, height: usize) -> Image {
    let sx = image.width() as f64 / width as f64;
    let sy = image.height() as f64 / height as f64;
    Image::from_fn(width, height, |x, y| {
        let px = (x as f64 + 0.5) * sx - 0.5;
        let py = (y as f64 + 0.5) * sy - 0.5;
        sample_bilinear(image, px, py).value
    })
}

fn scale_flow(u: Image, v: Image, from_w: usize, from_h: usize) -> FlowField {
    let fx = u.width() as f64 / from_w as f64;
    let fy = u.height() as f64 / from_h as f64;
    FlowField::from_components(u.map(|a| a * fx), v.map(|b| b * fy)).expect("matching components")
}

/// Bilinear upsampling of a flow field to `width x height`, with vectors
/// multiplied by the per-axis size ratio.
pub fn upscale_flow(flow: &FlowField, width: usize, height: usize) -> FlowField {
    let u = resample(&flow.u_image(), width, height);
    let v = resample(&flow.v_image(), width, height);
    scale_flow(u, v, flow.width(), flow.height())
}
