use ndarray::{s, Array2, Array3, Array4, ArrayView3, Axis};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::shape_err;
use crate::error::{Error, Result};

/// Multi-scale image embeddings. Level `s` has spatial shape
/// `ceil(finest / scales[s])` and `levels[s].shape()[3]` channels.
#[derive(Debug, Clone, PartialEq)]
pub struct FeaturePyramid {
    levels: Vec<Array4<f64>>,
    scales: Vec<[usize; 3]>,
}

pub(crate) fn spatial(a: &Array4<f64>) -> [usize; 3] {
    let s = a.shape();
    [s[0], s[1], s[2]]
}

impl FeaturePyramid {
    pub fn new(levels: Vec<Array4<f64>>, scales: Vec<[usize; 3]>) -> Result<Self> {
        if levels.is_empty() {
            return Err(Error::InvalidInput("feature pyramid needs at least one level".into()));
        }
        if levels.len() != scales.len() {
            return Err(shape_err("pyramid scales", levels.len(), scales.len()));
        }
        if scales[0] != [1, 1, 1] {
            return Err(Error::InvalidInput("finest pyramid level must have scale 1".into()));
        }
        let finest = spatial(&levels[0]);
        for (i, (l, f)) in levels.iter().zip(&scales).enumerate() {
            let expected: [usize; 3] = std::array::from_fn(|a| finest[a].div_ceil(f[a].max(1)));
            if f.contains(&0) || spatial(l) != expected {
                return Err(shape_err(&format!("pyramid level {i}"), expected, spatial(l)));
            }
            if l.iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidInput(format!("pyramid level {i} is not finite")));
            }
            if i > 0 {
                let prev = spatial(&levels[i - 1]);
                let cur = spatial(l);
                let shrinks = (0..3).all(|a| cur[a] <= prev[a]) && cur != prev;
                if !shrinks {
                    return Err(Error::InvalidInput(format!("pyramid level {i} does not shrink: {prev:?} -> {cur:?}")));
                }
            }
        }
        Ok(FeaturePyramid { levels, scales })
    }

    pub fn levels(&self) -> &[Array4<f64>] {
        &self.levels
    }

    pub fn scales(&self) -> &[[usize; 3]] {
        &self.scales
    }

    pub fn finest_shape(&self) -> [usize; 3] {
        spatial(&self.levels[0])
    }

    pub fn channels(&self) -> Vec<usize> {
        self.levels.iter().map(|l| l.shape()[3]).collect()
    }

    /// Total number of spatial positions over all levels.
    pub fn positions(&self) -> usize {
        self.levels.iter().map(|l| spatial(l).iter().product::<usize>()).sum()
    }
}

fn avg_pool(x: ArrayView3<f64>, f: usize) -> Array3<f64> {
    let sh = x.shape();
    let out = [sh[0].div_ceil(f), sh[1].div_ceil(f), sh[2].div_ceil(f)];
    Array3::from_shape_fn(out, |(i, j, k)| {
        let b = x.slice(s![i * f..((i + 1) * f).min(sh[0]), j * f..((j + 1) * f).min(sh[1]), k * f..((k + 1) * f).min(sh[2])]);
        b.sum() / b.len() as f64
    })
}

/// Stand-in visual encoder: strided average pooling of the intensities
/// followed by a fixed random linear map of `(x, 1)` per level.
#[derive(Debug, Clone, PartialEq)]
pub struct ToyEncoder {
    level_maps: Vec<Array2<f64>>,
    dense_map: Array2<f64>,
}

impl ToyEncoder {
    /// Level `s` has `16 << s` channels and stride `2^s`.
    pub fn new(levels: usize, dense_dim: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let normal = Normal::new(0.0, 1.0).unwrap();
        let mut map = |rows: usize| Array2::from_shape_fn((rows, 2), |_| normal.sample(&mut rng));
        let level_maps = (0..levels.max(1)).map(|s| map(16 << s)).collect();
        let dense_map = map(dense_dim);
        ToyEncoder { level_maps, dense_map }
    }

    pub fn level_dims(&self) -> Vec<usize> {
        self.level_maps.iter().map(|m| m.nrows()).collect()
    }

    pub fn dense_dim(&self) -> usize {
        self.dense_map.nrows()
    }

    /// Builds up to the configured number of levels, stopping early once
    /// pooling no longer shrinks the grid.
    pub fn pyramid(&self, x: ArrayView3<f64>) -> Result<FeaturePyramid> {
        let mut levels = Vec::new();
        let mut scales = Vec::new();
        let mut prev: Option<[usize; 3]> = None;
        for (s, w) in self.level_maps.iter().enumerate() {
            let f = 1usize << s;
            let pooled = avg_pool(x, f);
            let sh = [pooled.shape()[0], pooled.shape()[1], pooled.shape()[2]];
            if prev == Some(sh) {
                break;
            }
            prev = Some(sh);
            levels.push(lift(pooled.view(), w));
            scales.push([f; 3]);
        }
        FeaturePyramid::new(levels, scales)
    }

    /// Per-voxel dense features at full resolution.
    pub fn dense(&self, x: ArrayView3<f64>) -> Array4<f64> {
        lift(x, &self.dense_map)
    }
}

fn lift(x: ArrayView3<f64>, w: &Array2<f64>) -> Array4<f64> {
    let sh = x.shape();
    let mut out = Array4::zeros((sh[0], sh[1], sh[2], w.nrows()));
    for (mut lane, v) in out.lanes_mut(Axis(3)).into_iter().zip(x.iter()) {
        for (o, row) in lane.iter_mut().zip(w.rows()) {
            *o = row[0] * v + row[1];
        }
    }
    out
}
