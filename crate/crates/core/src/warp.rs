//! Bilinear backward warping, warp error and image derivatives.

use alloc::vec::Vec;

use crate::error::{bail, Result};
use crate::image::{FlowField, Image};
use crate::math::floor;

/// Result of sampling with clamp-to-edge coordinates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sample {
    pub value: f64,
    /// The requested point lay outside the image horizontally.
    pub out_x: bool,
    /// The requested point lay outside the image vertically.
    pub out_y: bool,
}

impl Sample {
    #[inline]
    pub fn valid(&self) -> bool {
        !(self.out_x || self.out_y)
    }
}

/// Bilinear interpolation at `(x, y)`; coordinates outside `[0, w-1] x [0, h-1]`
/// are clamped onto the border and flagged.
#[inline]
pub fn sample_bilinear(image: &Image, x: f64, y: f64) -> Sample {
    let (w, h) = (image.width(), image.height());
    let xmax = (w - 1) as f64;
    let ymax = (h - 1) as f64;
    // NaN coordinates count as outside.
    let out_x = !(x >= 0.0 && x <= xmax);
    let out_y = !(y >= 0.0 && y <= ymax);
    let xc = if out_x { if x > xmax { xmax } else { 0.0 } } else { x };
    let yc = if out_y { if y > ymax { ymax } else { 0.0 } } else { y };
    let x0 = floor(xc) as usize;
    let y0 = floor(yc) as usize;
    let x1 = (x0 + 1).min(w - 1);
    let y1 = (y0 + 1).min(h - 1);
    let fx = xc - x0 as f64;
    let fy = yc - y0 as f64;
    let a = image.get(x0, y0);
    let b = image.get(x1, y0);
    let c = image.get(x0, y1);
    let d = image.get(x1, y1);
    let top = (1.0 - fx) * a + fx * b;
    let bottom = (1.0 - fx) * c + fx * d;
    Sample { value: (1.0 - fy) * top + fy * bottom, out_x, out_y }
}

/// A backward-warped image and the validity of each sample point.
#[derive(Debug, Clone, PartialEq)]
pub struct Warped {
    pub image: Image,
    /// `true` where the sample point fell inside the source image.
    pub valid: Vec<bool>,
}

impl Warped {
    pub fn valid_count(&self) -> usize {
        self.valid.iter().filter(|&&v| v).count()
    }
}

/// `output(p) = image(p + flow(p))`, bilinear, clamp-to-edge.
pub fn backward_warp(image: &Image, flow: &FlowField) -> Result<Warped> {
    flow.check_matches(image)?;
    let (w, h) = (image.width(), image.height());
    let mut data = Vec::with_capacity(w * h);
    let mut valid = Vec::with_capacity(w * h);
    for y in 0..h {
        for x in 0..w {
            let (u, v) = flow.get(x, y);
            let s = sample_bilinear(image, x as f64 + u, y as f64 + v);
            data.push(s.value);
            valid.push(s.valid());
        }
    }
    Ok(Warped { image: Image::new(w, h, data)?, valid })
}

/// Warped derivative images with components zeroed along axes where the
/// sample point was clamped (the clamped intensity does not change there).
pub(crate) struct WarpedGradients {
    pub warped: Warped,
    pub dx: Vec<f64>,
    pub dy: Vec<f64>,
}

pub(crate) fn warp_with_gradients(image: &Image, flow: &FlowField) -> Result<WarpedGradients> {
    flow.check_matches(image)?;
    let (gx, gy) = gradient(image)?;
    let (w, h) = (image.width(), image.height());
    let mut data = Vec::with_capacity(w * h);
    let mut valid = Vec::with_capacity(w * h);
    let mut dx = Vec::with_capacity(w * h);
    let mut dy = Vec::with_capacity(w * h);
    for y in 0..h {
        for x in 0..w {
            let (u, v) = flow.get(x, y);
            let (px, py) = (x as f64 + u, y as f64 + v);
            let s = sample_bilinear(image, px, py);
            data.push(s.value);
            valid.push(s.valid());
            let sx = sample_bilinear(&gx, px, py).value;
            let sy = sample_bilinear(&gy, px, py).value;
            dx.push(if s.out_x { 0.0 } else { sx });
            dy.push(if s.out_y { 0.0 } else { sy });
        }
    }
    Ok(WarpedGradients { warped: Warped { image: Image::new(w, h, data)?, valid }, dx, dy })
}

/// Warp error `i1 - backward_warp(i2, flow)` together with the warp validity mask.
pub fn warp_error(i1: &Image, i2: &Image, flow: &FlowField) -> Result<Warped> {
    i1.check_same_size(i2, "warp_error images")?;
    let warped = backward_warp(i2, flow)?;
    Ok(Warped { image: i1.sub(&warped.image), valid: warped.valid })
}

/// Central differences in the interior, one-sided differences on the border.
/// Returns `(d/dx, d/dy)`.
pub fn gradient(image: &Image) -> Result<(Image, Image)> {
    let (w, h) = (image.width(), image.height());
    if w < 2 || h < 2 {
        bail!(InvalidArgument, "gradient needs at least 2x2 pixels, got {w}x{h}");
    }
    let dx = Image::from_fn(w, h, |x, y| {
        if x == 0 {
            image.get(1, y) - image.get(0, y)
        } else if x == w - 1 {
            image.get(w - 1, y) - image.get(w - 2, y)
        } else {
            0.5 * (image.get(x + 1, y) - image.get(x - 1, y))
        }
    });
    let dy = Image::from_fn(w, h, |x, y| {
        if y == 0 {
            image.get(x, 1) - image.get(x, 0)
        } else if y == h - 1 {
            image.get(x, h - 1) - image.get(x, h - 2)
        } else {
            0.5 * (image.get(x, y + 1) - image.get(x, y - 1))
        }
    });
    Ok((dx, dy))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn ramp(w: usize, h: usize) -> Image {
        Image::from_fn(w, h, |x, _| x as f64 / (w - 1) as f64)
    }

    fn textured(w: usize, h: usize) -> Image {
        Image::from_fn(w, h, |x, y| {
            0.5 + 0.3 * libm::sin(0.7 * x as f64 + 0.3 * y as f64) * libm::cos(0.4 * y as f64)
        })
    }

    #[test]
    fn zero_flow_is_identity() {
        let img = textured(13, 9);
        let warped = backward_warp(&img, &FlowField::zeros(13, 9)).unwrap();
        assert_eq!(warped.image, img);
        assert!(warped.valid.iter().all(|&v| v));
    }

    #[test]
    fn integer_shift_of_ramp() {
        let (w, h) = (10, 6);
        let img = ramp(w, h);
        let warped = backward_warp(&img, &FlowField::constant(w, h, 1.0, 0.0)).unwrap();
        for y in 0..h {
            for x in 0..w - 1 {
                let expect = (x + 1) as f64 / (w - 1) as f64;
                assert!((warped.image.get(x, y) - expect).abs() < 1e-15);
                assert!(warped.valid[y * w + x]);
            }
            assert!(!warped.valid[y * w + w - 1]);
            assert_eq!(warped.image.get(w - 1, y), 1.0);
        }
    }

    #[test]
    fn half_pixel_shift_of_ramp_is_exact() {
        let (w, h) = (10, 6);
        let img = ramp(w, h);
        let warped = backward_warp(&img, &FlowField::constant(w, h, 0.5, 0.0)).unwrap();
        for y in 0..h {
            for x in 0..w - 1 {
                let expect = (x as f64 + 0.5) / (w - 1) as f64;
                assert!((warped.image.get(x, y) - expect).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn warp_rejects_mismatched_flow() {
        assert!(backward_warp(&ramp(4, 4), &FlowField::zeros(4, 5)).is_err());
        assert!(warp_error(&ramp(4, 4), &ramp(5, 4), &FlowField::zeros(4, 4)).is_err());
    }

    #[test]
    fn warp_error_examples() {
        let img = textured(12, 12);
        let zero = FlowField::zeros(12, 12);
        let e = warp_error(&img, &img, &zero).unwrap();
        assert!(e.image.as_slice().iter().all(|&v| v == 0.0));

        let offset = img.map(|v| v + 0.125);
        let e = warp_error(&offset, &img, &zero).unwrap();
        assert!(e.image.as_slice().iter().all(|&v| (v - 0.125).abs() < 1e-15));

        // i2(x) = i1(x - d), so i2(p + d) = i1(p) for p + d inside.
        let (dx, dy) = (2usize, 1usize);
        let i2 = Image::from_fn(12, 12, |x, y| {
            img.get(x.saturating_sub(dx), y.saturating_sub(dy))
        });
        let e = warp_error(&img, &i2, &FlowField::constant(12, 12, dx as f64, dy as f64)).unwrap();
        for y in 0..12 - dy {
            for x in 0..12 - dx {
                assert_eq!(e.image.get(x, y), 0.0);
            }
        }
    }

    #[test]
    fn gradient_of_ramps() {
        let c = Image::filled(6, 5, 0.3);
        let (gx, gy) = gradient(&c).unwrap();
        assert!(gx.as_slice().iter().chain(gy.as_slice()).all(|&v| v == 0.0));

        let a = 0.07;
        let rx = Image::from_fn(7, 6, |x, _| a * x as f64);
        let (gx, gy) = gradient(&rx).unwrap();
        for y in 0..6 {
            for x in 0..7 {
                assert!((gx.get(x, y) - a).abs() < 1e-15);
                assert_eq!(gy.get(x, y), 0.0);
            }
        }
        let b = -0.05;
        let ry = Image::from_fn(7, 6, |_, y| b * y as f64);
        let (gx, gy) = gradient(&ry).unwrap();
        for y in 1..5 {
            for x in 1..6 {
                assert_eq!(gx.get(x, y), 0.0);
                assert!((gy.get(x, y) - b).abs() < 1e-15);
            }
        }
        assert!(gradient(&Image::zeros(1, 5)).is_err());
    }

    #[test]
    fn dyadic_warp_error_recomposes_exactly() {
        // Values k/256 and half-pixel flows keep every operation exact.
        let i1 = Image::from_fn(9, 7, |x, y| ((x * 37 + y * 11) % 256) as f64 / 256.0);
        let i2 = Image::from_fn(9, 7, |x, y| ((x * 13 + y * 29) % 256) as f64 / 256.0);
        let flow = FlowField::from_fn(9, 7, |x, y| (0.5 * (x % 3) as f64, -0.5 * (y % 2) as f64));
        let e = warp_error(&i1, &i2, &flow).unwrap();
        let w = backward_warp(&i2, &flow).unwrap();
        assert_eq!(e.image.add(&w.image), i1);
    }

    proptest! {
        #[test]
        fn bilinear_reproduces_affine(a in -1.0f64..1.0, b in -1.0f64..1.0, c in -1.0f64..1.0,
                                      x in 0.0f64..8.999, y in 0.0f64..5.999) {
            let img = Image::from_fn(10, 7, |i, j| a * i as f64 + b * j as f64 + c);
            let s = sample_bilinear(&img, x, y);
            prop_assert!(s.valid());
            prop_assert!((s.value - (a * x + b * y + c)).abs() < 1e-12);
        }

        #[test]
        fn warp_error_recomposes(seed in 0u64..1000, su in -3.0f64..3.0, sv in -3.0f64..3.0) {
            let i1 = Image::from_fn(8, 8, |x, y| libm::sin((seed as f64) + 1.3 * x as f64 + 0.7 * y as f64) * 0.5 + 0.5);
            let i2 = Image::from_fn(8, 8, |x, y| libm::cos((seed as f64) + 0.9 * x as f64 - 0.4 * y as f64) * 0.5 + 0.5);
            let flow = FlowField::constant(8, 8, su, sv);
            let e = warp_error(&i1, &i2, &flow).unwrap();
            let w = backward_warp(&i2, &flow).unwrap();
            // One rounding in the subtraction and one in the addition.
            prop_assert!(e.image.add(&w.image).max_abs_diff(&i1) <= 2.0 * f64::EPSILON);
        }
    }
}
