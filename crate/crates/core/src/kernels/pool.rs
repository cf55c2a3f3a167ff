use ndarray::{s, Array1, Array2, Array3, ArrayView2, ArrayView3};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::pyramid::spatial;
use super::{shape_err, Embedding, FeaturePyramid};
use crate::error::{Error, Result};
use crate::mask::BinaryMask;

/// Downsamples a mask by taking the OR over each `scale` block.
pub fn max_pool_mask(m: ArrayView3<bool>, scale: [usize; 3]) -> Array3<bool> {
    let sh = m.shape();
    let out: [usize; 3] = std::array::from_fn(|a| sh[a].div_ceil(scale[a]));
    Array3::from_shape_fn(out, |(i, j, k)| {
        let (f0, f1, f2) = (scale[0], scale[1], scale[2]);
        m.slice(s![i * f0..((i + 1) * f0).min(sh[0]), j * f1..((j + 1) * f1).min(sh[1]), k * f2..((k + 1) * f2).min(sh[2])])
            .iter()
            .any(|v| *v)
    })
}

/// Masked average of every pyramid level, concatenated over levels and
/// projected to the text width by `proj` (`d x sum(channels)`).
///
/// A level whose downsampled mask is empty contributes zeros.
pub fn roi_pool(pyramid: &FeaturePyramid, mask: &BinaryMask, proj: ArrayView2<f64>) -> Result<Embedding> {
    if mask.shape() != pyramid.finest_shape() {
        return Err(shape_err("roi mask", pyramid.finest_shape(), mask.shape()));
    }
    let total: usize = pyramid.channels().iter().sum();
    if proj.ncols() != total {
        return Err(shape_err("roi projection columns", total, proj.ncols()));
    }
    if mask.is_empty() {
        return Err(Error::EmptyMask);
    }
    let mut cat = Array1::zeros(total);
    let mut off = 0;
    for (level, scale) in pyramid.levels().iter().zip(pyramid.scales()) {
        let c = level.shape()[3];
        let m = max_pool_mask(mask.data.view(), *scale);
        debug_assert_eq!(m.shape(), &spatial(level));
        let mut acc = Array1::<f64>::zeros(c);
        let mut n = 0usize;
        for ((i, j, k), set) in m.indexed_iter() {
            if *set {
                acc += &level.slice(s![i, j, k, ..]);
                n += 1;
            }
        }
        if n > 0 {
            cat.slice_mut(s![off..off + c]).assign(&(acc / n as f64));
        }
        off += c;
    }
    Ok(proj.dot(&cat))
}

/// Projection used by [`roi_pool`] to map concatenated level means to `d`.
#[derive(Debug, Clone, PartialEq)]
pub struct RoiPooler {
    pub proj: Array2<f64>,
}

impl RoiPooler {
    pub fn random(dim: usize, level_dims: &[usize], seed: u64) -> Self {
        let cols: usize = level_dims.iter().sum();
        let normal = Normal::new(0.0, 1.0 / (cols.max(1) as f64).sqrt()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        RoiPooler {
            proj: Array2::from_shape_fn((dim, cols), |_| normal.sample(&mut rng)),
        }
    }

    pub fn pool(&self, pyramid: &FeaturePyramid, mask: &BinaryMask) -> Result<Embedding> {
        roi_pool(pyramid, mask, self.proj.view())
    }
}
