//! Warp-error patch datasets.

use alloc::format;
use alloc::vec::Vec;

use rand::seq::SliceRandom;

use crate::error::{bail, Error, Result};
use crate::image::{FlowField, Image};
use crate::rng;
use crate::warp::warp_error;

/// Train fraction used when none is given: 708 of 1041 image pairs.
pub const DEFAULT_TRAIN_FRACTION: f64 = 708.0 / 1041.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Split {
    Train,
    Test,
}

/// Flattened, row-major patches of a common size, stored contiguously.
#[derive(Debug, Clone, PartialEq)]
pub struct PatchSet {
    patch_size: usize,
    split: Split,
    data: Vec<f64>,
}

impl PatchSet {
    pub fn new(patch_size: usize, split: Split) -> Self {
        assert!(patch_size > 0);
        PatchSet { patch_size, split, data: Vec::new() }
    }

    pub fn from_flat(patch_size: usize, split: Split, data: Vec<f64>) -> Result<Self> {
        if patch_size == 0 {
            bail!(InvalidArgument, "patch size must be positive");
        }
        let dim = patch_size * patch_size;
        if data.len() % dim != 0 {
            bail!(DimensionMismatch, "{} values is not a whole number of {dim}-dim patches", data.len());
        }
        if let Some(i) = data.iter().position(|v| !v.is_finite()) {
            bail!(NonFinite, "patch {} contains a non-finite value", i / dim);
        }
        Ok(PatchSet { patch_size, split, data })
    }

    /// Patch size from a flattened dimension, which must be a perfect square.
    pub fn side_for_dim(dim: usize) -> Result<usize> {
        let side = crate::math::round(crate::math::sqrt(dim as f64)) as usize;
        if side == 0 || side * side != dim {
            bail!(InvalidArgument, "patch dimension {dim} is not a square");
        }
        Ok(side)
    }

    #[inline]
    pub fn patch_size(&self) -> usize {
        self.patch_size
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.patch_size * self.patch_size
    }

    pub fn split(&self) -> Split {
        self.split
    }

    pub fn with_split(mut self, split: Split) -> Self {
        self.split = split;
        self
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.data.len() / self.dim()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    #[inline]
    pub fn get(&self, i: usize) -> &[f64] {
        let d = self.dim();
        &self.data[i * d..(i + 1) * d]
    }

    pub fn iter(&self) -> core::slice::ChunksExact<'_, f64> {
        self.data.chunks_exact(self.dim())
    }

    pub fn as_flat(&self) -> &[f64] {
        &self.data
    }

    pub fn into_flat(self) -> Vec<f64> {
        self.data
    }

    pub fn push(&mut self, patch: &[f64]) -> Result<()> {
        if patch.len() != self.dim() {
            bail!(DimensionMismatch, "patch has {} values, set holds {}", patch.len(), self.dim());
        }
        if patch.iter().any(|v| !v.is_finite()) {
            bail!(NonFinite, "patch contains a non-finite value");
        }
        self.data.extend_from_slice(patch);
        Ok(())
    }

    pub fn extend(&mut self, other: &PatchSet) -> Result<()> {
        if other.patch_size != self.patch_size {
            bail!(DimensionMismatch, "patch sizes {} and {}", self.patch_size, other.patch_size);
        }
        self.data.extend_from_slice(&other.data);
        Ok(())
    }

    pub fn select(&self, indices: &[usize]) -> PatchSet {
        let mut out = PatchSet::new(self.patch_size, self.split);
        out.data.reserve(indices.len() * self.dim());
        for &i in indices {
            out.data.extend_from_slice(self.get(i));
        }
        out
    }

    /// Uniform subsample without replacement, kept in original order.
    /// Returns everything when the set is not larger than `count`.
    pub fn subsample(&self, count: usize, seed: u64) -> PatchSet {
        if self.len() <= count {
            return self.clone();
        }
        let mut rng = rng::seeded(seed);
        let mut idx = rand::seq::index::sample(&mut rng, self.len(), count).into_vec();
        idx.sort_unstable();
        self.select(&idx)
    }

    /// Mean over all entries of `f(value)`.
    pub fn mean_of(&self, f: impl Fn(f64) -> f64) -> f64 {
        if self.data.is_empty() {
            return f64::NAN;
        }
        self.data.iter().map(|&v| f(v)).sum::<f64>() / self.data.len() as f64
    }
}

/// Number of patch positions along one axis.
pub fn positions_along(extent: usize, patch_size: usize, stride: usize) -> usize {
    if extent < patch_size {
        0
    } else {
        (extent - patch_size) / stride + 1
    }
}

/// Patches with top-left corners on the `stride` grid that lie fully inside
/// the image and (when a mask is given) touch only valid pixels.
pub fn extract_patches(
    image: &Image,
    valid: Option<&[bool]>,
    patch_size: usize,
    stride: usize,
) -> Result<PatchSet> {
    if patch_size == 0 || stride == 0 {
        bail!(InvalidArgument, "patch size and stride must be positive");
    }
    if let Some(mask) = valid {
        if mask.len() != image.len() {
            bail!(DimensionMismatch, "mask has {} entries for {} pixels", mask.len(), image.len());
        }
    }
    let (w, h) = (image.width(), image.height());
    let mut set = PatchSet::new(patch_size, Split::Train);
    let nx = positions_along(w, patch_size, stride);
    let ny = positions_along(h, patch_size, stride);
    let mut buf = Vec::with_capacity(patch_size * patch_size);
    for py in 0..ny {
        for px in 0..nx {
            let (x0, y0) = (px * stride, py * stride);
            buf.clear();
            let mut ok = true;
            'rows: for y in y0..y0 + patch_size {
                for x in x0..x0 + patch_size {
                    if let Some(mask) = valid {
                        if !mask[y * w + x] {
                            ok = false;
                            break 'rows;
                        }
                    }
                    buf.push(image.get(x, y));
                }
            }
            if ok {
                set.push(&buf)?;
            }
        }
    }
    Ok(set)
}

/// Two frames and the ground-truth flow from the first to the second.
#[derive(Debug, Clone, PartialEq)]
pub struct FlowPair {
    pub i1: Image,
    pub i2: Image,
    pub flow: FlowField,
}

impl FlowPair {
    pub fn check(&self) -> Result<()> {
        self.i1.check_same_size(&self.i2, "frames")?;
        self.flow.check_matches(&self.i1)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DatasetConfig {
    pub patch_size: usize,
    pub stride: usize,
    /// `None` keeps every extracted patch.
    pub sample_count: Option<usize>,
    pub seed: u64,
}

impl Default for DatasetConfig {
    fn default() -> Self {
        DatasetConfig { patch_size: 8, stride: 8, sample_count: None, seed: 0 }
    }
}

/// Warp each pair by its ground truth, cut the warp error into patches and
/// subsample. The result depends only on the pair order and the seed.
pub fn build_dataset<'a>(
    pairs: impl IntoIterator<Item = &'a FlowPair>,
    config: &DatasetConfig,
    split: Split,
) -> Result<PatchSet> {
    let mut all = PatchSet::new(config.patch_size, split);
    for (i, pair) in pairs.into_iter().enumerate() {
        let err = warp_error(&pair.i1, &pair.i2, &pair.flow)
            .map_err(|e| Error::InvalidArgument(format!("pair {i}: {e}")))?;
        let patches = extract_patches(&err.image, Some(&err.valid), config.patch_size, config.stride)?;
        all.extend(&patches)?;
    }
    Ok(match config.sample_count {
        Some(n) => all.subsample(n, config.seed),
        None => all,
    })
}

/// Partition `0..n` into train and test index lists (each sorted). A
/// fraction strictly between 0 and 1 leaves both sides non-empty when `n >= 2`.
pub fn split_pairs(n: usize, train_fraction: f64, seed: u64) -> Result<(Vec<usize>, Vec<usize>)> {
    if !(0.0..=1.0).contains(&train_fraction) {
        bail!(InvalidArgument, "train fraction must lie in [0, 1], got {train_fraction}");
    }
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut rng::seeded(seed));
    let mut n_train = crate::math::round(n as f64 * train_fraction) as usize;
    if n >= 2 && train_fraction > 0.0 && train_fraction < 1.0 {
        n_train = n_train.clamp(1, n - 1);
    }
    let mut train = idx[..n_train].to_vec();
    let mut test = idx[n_train..].to_vec();
    train.sort_unstable();
    test.sort_unstable();
    Ok((train, test))
}
