//! Single-channel images and dense flow fields.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{bail, Error, Result};

/// Row-major single-channel image. Intensities live in [0, 1]; warp-error
/// images live in [-1, 1].
#[derive(Debug, Clone, PartialEq)]
pub struct Image {
    width: usize,
    height: usize,
    data: Vec<f64>,
}

impl Image {
    pub fn new(width: usize, height: usize, data: Vec<f64>) -> Result<Self> {
        if width == 0 || height == 0 {
            bail!(InvalidArgument, "image dimensions must be positive, got {width}x{height}");
        }
        if data.len() != width * height {
            bail!(
                DimensionMismatch,
                "image data has {} values, expected {}x{}",
                data.len(),
                width,
                height
            );
        }
        Ok(Image { width, height, data })
    }

    /// Panics on zero dimensions.
    pub fn zeros(width: usize, height: usize) -> Self {
        Self::filled(width, height, 0.0)
    }

    pub fn filled(width: usize, height: usize, value: f64) -> Self {
        assert!(width > 0 && height > 0, "image dimensions must be positive");
        Image { width, height, data: vec![value; width * height] }
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        assert!(width > 0 && height > 0, "image dimensions must be positive");
        let mut data = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                data.push(f(x, y));
            }
        }
        Image { width, height, data }
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.data.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.data[y * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, value: f64) {
        self.data[y * self.width + x] = value;
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    pub fn same_size(&self, other: &Image) -> bool {
        self.width == other.width && self.height == other.height
    }

    pub(crate) fn check_same_size(&self, other: &Image, what: &str) -> Result<()> {
        if !self.same_size(other) {
            return Err(Error::DimensionMismatch(format!(
                "{what}: {}x{} vs {}x{}",
                self.width, self.height, other.width, other.height
            )));
        }
        Ok(())
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Image {
        Image {
            width: self.width,
            height: self.height,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    /// Pixelwise `self - other`. Panics on size mismatch.
    pub fn sub(&self, other: &Image) -> Image {
        assert!(self.same_size(other));
        Image {
            width: self.width,
            height: self.height,
            data: self.data.iter().zip(&other.data).map(|(a, b)| a - b).collect(),
        }
    }

    /// Pixelwise `self + other`. Panics on size mismatch.
    pub fn add(&self, other: &Image) -> Image {
        assert!(self.same_size(other));
        Image {
            width: self.width,
            height: self.height,
            data: self.data.iter().zip(&other.data).map(|(a, b)| a + b).collect(),
        }
    }

    pub fn max_abs_diff(&self, other: &Image) -> f64 {
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    /// Copy of the rectangle `[x0, x0+w) x [y0, y0+h)`.
    pub fn crop(&self, x0: usize, y0: usize, w: usize, h: usize) -> Result<Image> {
        if x0 + w > self.width || y0 + h > self.height || w == 0 || h == 0 {
            bail!(InvalidArgument, "crop {w}x{h}+{x0}+{y0} outside {}x{}", self.width, self.height);
        }
        Ok(Image::from_fn(w, h, |x, y| self.get(x0 + x, y0 + y)))
    }
}

/// Per-pixel displacement (u, v) in pixels. A pixel `p` of the first image
/// corresponds to `p + (u(p), v(p))` in the second image.
#[derive(Debug, Clone, PartialEq)]
pub struct FlowField {
    width: usize,
    height: usize,
    u: Vec<f64>,
    v: Vec<f64>,
}

impl FlowField {
    pub fn new(width: usize, height: usize, u: Vec<f64>, v: Vec<f64>) -> Result<Self> {
        if width == 0 || height == 0 {
            bail!(InvalidArgument, "flow dimensions must be positive, got {width}x{height}");
        }
        let n = width * height;
        if u.len() != n || v.len() != n {
            bail!(
                DimensionMismatch,
                "flow components have {}/{} values, expected {}",
                u.len(),
                v.len(),
                n
            );
        }
        if let Some(i) = u.iter().chain(v.iter()).position(|x| !x.is_finite()) {
            bail!(NonFinite, "flow entry {} is not finite", i % n);
        }
        Ok(FlowField { width, height, u, v })
    }

    pub fn zeros(width: usize, height: usize) -> Self {
        Self::constant(width, height, 0.0, 0.0)
    }

    pub fn constant(width: usize, height: usize, u: f64, v: f64) -> Self {
        assert!(width > 0 && height > 0, "flow dimensions must be positive");
        assert!(u.is_finite() && v.is_finite());
        let n = width * height;
        FlowField { width, height, u: vec![u; n], v: vec![v; n] }
    }

    /// Panics if `f` produces non-finite values.
    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> (f64, f64)) -> Self {
        assert!(width > 0 && height > 0, "flow dimensions must be positive");
        let n = width * height;
        let mut u = Vec::with_capacity(n);
        let mut v = Vec::with_capacity(n);
        for y in 0..height {
            for x in 0..width {
                let (a, b) = f(x, y);
                assert!(a.is_finite() && b.is_finite(), "non-finite flow at ({x},{y})");
                u.push(a);
                v.push(b);
            }
        }
        FlowField { width, height, u, v }
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.u.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.u.is_empty()
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> (f64, f64) {
        let i = y * self.width + x;
        (self.u[i], self.v[i])
    }

    pub fn u(&self) -> &[f64] {
        &self.u
    }

    pub fn v(&self) -> &[f64] {
        &self.v
    }

    pub fn u_image(&self) -> Image {
        Image { width: self.width, height: self.height, data: self.u.clone() }
    }

    pub fn v_image(&self) -> Image {
        Image { width: self.width, height: self.height, data: self.v.clone() }
    }

    pub fn from_components(u: Image, v: Image) -> Result<Self> {
        u.check_same_size(&v, "flow components")?;
        let (w, h) = (u.width, u.height);
        FlowField::new(w, h, u.data, v.data)
    }

    pub fn matches(&self, image: &Image) -> bool {
        self.width == image.width() && self.height == image.height()
    }

    pub(crate) fn check_matches(&self, image: &Image) -> Result<()> {
        if !self.matches(image) {
            bail!(
                DimensionMismatch,
                "flow is {}x{} but image is {}x{}",
                self.width,
                self.height,
                image.width(),
                image.height()
            );
        }
        Ok(())
    }

    /// Integer shift of a periodic field: output(x, y) = self(x - dx, y - dy) (wrapping).
    pub fn shifted_periodic(&self, dx: isize, dy: isize) -> FlowField {
        let (w, h) = (self.width as isize, self.height as isize);
        FlowField::from_fn(self.width, self.height, |x, y| {
            let sx = (x as isize - dx).rem_euclid(w) as usize;
            let sy = (y as isize - dy).rem_euclid(h) as usize;
            self.get(sx, sy)
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_bad_dimensions() {
        assert!(Image::new(0, 3, vec![]).is_err());
        assert!(Image::new(2, 2, vec![0.0; 3]).is_err());
        assert!(FlowField::new(1, 1, vec![f64::NAN], vec![0.0]).is_err());
        assert!(FlowField::new(2, 1, vec![0.0; 2], vec![0.0]).is_err());
    }

    #[test]
    fn accessors_are_row_major() {
        let img = Image::from_fn(3, 2, |x, y| (10 * y + x) as f64);
        assert_eq!(img.as_slice(), &[0.0, 1.0, 2.0, 10.0, 11.0, 12.0]);
        assert_eq!(img.get(2, 1), 12.0);
    }
}
