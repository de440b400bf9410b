//! Patch-prior denoising of the warp error.

use alloc::vec;

use super::cost::{for_patch_blocks, model_patch_size};
use crate::error::{bail, Result};
use crate::image::Image;
use crate::models::DensityModel;

/// Denoise `d_v` under the patch prior with noise variance `1/(2β)`:
/// every stride-1 patch is replaced by its MAP estimate `x̂_i` and the
/// estimates are blended back as `r = (d_v + Σ_i x̂_i) / (1 + N_p)`.
pub fn r_step(model: &DensityModel, d_v: &Image, beta: f64) -> Result<Image> {
    r_step_with_stride(model, d_v, beta, 1)
}

pub fn r_step_with_stride(model: &DensityModel, d_v: &Image, beta: f64, stride: usize) -> Result<Image> {
    if !(beta > 0.0) || beta.is_infinite() {
        bail!(InvalidArgument, "beta must be positive and finite, got {beta}");
    }
    if stride == 0 {
        bail!(InvalidArgument, "patch stride must be positive");
    }
    let p = model_patch_size(model)?;
    let denoiser = model.denoiser(0.5 / beta)?;
    let w = d_v.width();
    let mut sum = d_v.as_slice().to_vec();
    let mut count = vec![1.0f64; d_v.len()];
    let mut est = vec![];
    for_patch_blocks(d_v, p, stride, |corners, block| {
        est.resize(block.len(), 0.0);
        denoiser.denoise_batch(block, &mut est);
        for (&(x0, y0), patch) in corners.iter().zip(est.chunks_exact(p * p)) {
            for dy in 0..p {
                let row = (y0 + dy) * w + x0;
                for dx in 0..p {
                    sum[row + dx] += patch[dy * p + dx];
                    count[row + dx] += 1.0;
                }
            }
        }
        Ok(())
    })?;
    for (s, c) in sum.iter_mut().zip(&count) {
        *s /= c;
    }
    Image::new(w, d_v.height(), sum)
}

/// Standalone EPLL denoising of an image corrupted by Gaussian noise of
/// standard deviation `sigma`.
pub fn denoise_image(model: &DensityModel, noisy: &Image, sigma: f64) -> Result<Image> {
    if !(sigma > 0.0) || sigma.is_infinite() {
        bail!(InvalidArgument, "noise sigma must be positive and finite, got {sigma}");
    }
    r_step(model, noisy, 0.5 / (sigma * sigma))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gmm::GmmModel;
    use crate::models::BaselineModel;
    use alloc::vec::Vec;
    use nalgebra::DMatrix;

    fn noisy(w: usize, h: usize) -> Image {
        Image::from_fn(w, h, |x, y| 0.3 * libm::sin(1.3 * x as f64 + 0.7 * y as f64) + 0.01 * (x * y % 5) as f64)
    }

    #[test]
    fn huge_beta_keeps_the_input() {
        let m: DensityModel = BaselineModel::bcl2(4, 2.0).unwrap().into();
        let d = noisy(12, 10);
        let r = r_step(&m, &d, 1e12).unwrap();
        assert!(r.max_abs_diff(&d) < 1e-6);
    }

    #[test]
    fn zero_input_is_a_fixed_point() {
        let g = GmmModel::new(vec![0.5, 0.5], vec![DMatrix::identity(4, 4), DMatrix::identity(4, 4) * 0.1]).unwrap();
        for m in [DensityModel::from(g), BaselineModel::gcl1(2, 1.0, 0.3).unwrap().into()] {
            let r = r_step(&m, &Image::zeros(9, 9), 3.0).unwrap();
            assert!(r.as_slice().iter().all(|&v| v == 0.0));
        }
    }

    #[test]
    fn single_gaussian_blend_closed_form() {
        // Σ = I, noise variance 1/(2β) = 0.25: every patch estimate is y / 1.25.
        let g = GmmModel::new(vec![1.0], vec![DMatrix::identity(4, 4)]).unwrap();
        let m = DensityModel::from(g);
        let d = Image::filled(5, 4, 0.8);
        let r = r_step(&m, &d, 2.0).unwrap();
        for y in 0..4usize {
            for x in 0..5usize {
                let nx = (x.min(3) + 1) - x.saturating_sub(1);
                let ny = (y.min(2) + 1) - y.saturating_sub(1);
                let n = (nx * ny) as f64;
                let want = (0.8 + n * 0.8 / 1.25) / (1.0 + n);
                assert!((r.get(x, y) - want).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn output_minimizes_the_quadratic_surrogate() {
        let covs = vec![DMatrix::identity(4, 4) * 0.02, DMatrix::from_fn(4, 4, |i, j| if i == j { 0.3 } else { 0.1 })];
        let g = GmmModel::new(vec![0.6, 0.4], covs).unwrap();
        let m = DensityModel::from(g);
        let d = noisy(7, 6);
        let beta = 5.0;
        let r = r_step(&m, &d, beta).unwrap();
        // Patch estimates for fixed component choices.
        let den = m.denoiser(0.5 / beta).unwrap();
        let mut est: Vec<(usize, usize, [f64; 4])> = Vec::new();
        for y0 in 0..5 {
            for x0 in 0..6 {
                let y = [d.get(x0, y0), d.get(x0 + 1, y0), d.get(x0, y0 + 1), d.get(x0 + 1, y0 + 1)];
                let mut out = [0.0; 4];
                den.denoise(&y, &mut out);
                est.push((x0, y0, out));
            }
        }
        let surrogate = |r: &Image| {
            let mut c: f64 = d.as_slice().iter().zip(r.as_slice()).map(|(a, b)| (a - b) * (a - b)).sum();
            for (x0, y0, e) in &est {
                let pr = [r.get(*x0, *y0), r.get(x0 + 1, *y0), r.get(*x0, y0 + 1), r.get(x0 + 1, y0 + 1)];
                c += pr.iter().zip(e).map(|(a, b)| (a - b) * (a - b)).sum::<f64>();
            }
            beta * c
        };
        let base = surrogate(&r);
        for i in 0..r.len() {
            for delta in [-1e-4, 1e-4] {
                let mut rp = r.clone();
                rp.as_mut_slice()[i] += delta;
                assert!(surrogate(&rp) >= base);
            }
        }
    }
}
