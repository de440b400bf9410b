//! EPLL and split costs.

use alloc::vec::Vec;

use crate::error::{bail, Result};
use crate::image::{FlowField, Image};
use crate::models::DensityModel;
use crate::patches::{positions_along, PatchSet};
use crate::warp::warp_error;

/// Patches handed to a model per call.
const BLOCK: usize = 2048;

/// Total variation `Σ |∂x u| + |∂y u| + |∂x v| + |∂y v|` with forward
/// differences (no contribution across the last row or column).
pub fn regularizer(flow: &FlowField) -> f64 {
    let (w, h) = (flow.width(), flow.height());
    let mut total = 0.0;
    for c in [flow.u(), flow.v()] {
        for y in 0..h {
            for x in 0..w {
                let i = y * w + x;
                if x + 1 < w {
                    total += (c[i + 1] - c[i]).abs();
                }
                if y + 1 < h {
                    total += (c[i + w] - c[i]).abs();
                }
            }
        }
    }
    total
}

/// Side length of the square patches a model scores.
pub(crate) fn model_patch_size(model: &DensityModel) -> Result<usize> {
    PatchSet::side_for_dim(model.dim())
}

/// Visit the patches whose top-left corners lie on the `stride` grid in
/// raster order, a block at a time. `f` receives the corners and the
/// flattened row-major patches.
pub(crate) fn for_patch_blocks(
    image: &Image,
    p: usize,
    stride: usize,
    mut f: impl FnMut(&[(usize, usize)], &[f64]) -> Result<()>,
) -> Result<()> {
    let nx = positions_along(image.width(), p, stride);
    let ny = positions_along(image.height(), p, stride);
    let mut corners = Vec::with_capacity(BLOCK);
    let mut buf = Vec::with_capacity(BLOCK * p * p);
    let src = image.as_slice();
    let w = image.width();
    for py in 0..ny {
        for px in 0..nx {
            let (x0, y0) = (px * stride, py * stride);
            corners.push((x0, y0));
            for y in y0..y0 + p {
                buf.extend_from_slice(&src[y * w + x0..y * w + x0 + p]);
            }
            if corners.len() == BLOCK {
                f(&corners, &buf)?;
                corners.clear();
                buf.clear();
            }
        }
    }
    if !corners.is_empty() {
        f(&corners, &buf)?;
    }
    Ok(())
}

/// `-Σ_i log p(P_i image)` over the patches on the `stride` grid.
pub fn patch_neg_log_likelihood(model: &DensityModel, image: &Image, stride: usize) -> Result<f64> {
    if stride == 0 {
        bail!(InvalidArgument, "patch stride must be positive");
    }
    let p = model_patch_size(model)?;
    let mut total = 0.0;
    for_patch_blocks(image, p, stride, |_, block| {
        total -= model.logpdf_batch(block)?.iter().sum::<f64>();
        Ok(())
    })?;
    Ok(total)
}

/// Expected patch log-likelihood cost of a flow field,
/// `-Σ_i log p(P_i d_v) + λ R(v)` with dense (stride 1) patches.
pub fn epll_cost(model: &DensityModel, i1: &Image, i2: &Image, flow: &FlowField, lambda_reg: f64) -> Result<f64> {
    epll_cost_with_stride(model, i1, i2, flow, lambda_reg, 1)
}

pub fn epll_cost_with_stride(
    model: &DensityModel,
    i1: &Image,
    i2: &Image,
    flow: &FlowField,
    lambda_reg: f64,
    stride: usize,
) -> Result<f64> {
    let d = warp_error(i1, i2, flow)?.image;
    Ok(patch_neg_log_likelihood(model, &d, stride)? + lambda_reg * regularizer(flow))
}

pub(crate) fn sq_dist(a: &Image, b: &Image) -> f64 {
    a.as_slice().iter().zip(b.as_slice()).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// The split objective `β‖d_v - r‖² - Σ_i log p(P_i r) + λ R(v)`.
pub fn split_cost(
    model: &DensityModel,
    i1: &Image,
    i2: &Image,
    flow: &FlowField,
    r: &Image,
    beta: f64,
    lambda_reg: f64,
) -> Result<f64> {
    let d = warp_error(i1, i2, flow)?.image;
    d.check_same_size(r, "split variable")?;
    Ok(beta * sq_dist(&d, r) + patch_neg_log_likelihood(model, r, 1)? + lambda_reg * regularizer(flow))
}
