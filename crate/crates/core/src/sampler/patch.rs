use std::collections::BTreeSet;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::Rng;

use crate::error::{Error, Result};
use crate::labels::MaskSet;
use crate::volume::{LabelVolume, PatchSpec};

/// Edge of the cubic cell over which class multiplicity is counted.
pub const DEFAULT_CELL: usize = 3;

/// Foreground voxels of a scan, each weighted by the number of distinct
/// classes present in its cell of a coarse grid.
#[derive(Debug, Clone)]
pub struct ForegroundMap {
    shape: [usize; 3],
    voxels: Vec<[usize; 3]>,
    weights: Vec<u32>,
}

fn cell_of(v: [usize; 3], cell: usize) -> [usize; 3] {
    [v[0] / cell, v[1] / cell, v[2] / cell]
}

fn cell_grid(shape: [usize; 3], cell: usize) -> [usize; 3] {
    shape.map(|s| s.div_ceil(cell))
}

fn flat(c: [usize; 3], grid: [usize; 3]) -> usize {
    (c[0] * grid[1] + c[1]) * grid[2] + c[2]
}

impl ForegroundMap {
    /// Classes are the distinct nonzero codes of the label volume.
    pub fn from_labels(l: &LabelVolume, cell: usize) -> Self {
        let cell = cell.max(1);
        let shape = l.shape();
        let grid = cell_grid(shape, cell);
        let mut classes: Vec<BTreeSet<u16>> = vec![BTreeSet::new(); grid.iter().product()];
        let mut voxels = Vec::new();
        for ((i, j, k), code) in l.data.indexed_iter() {
            if *code != 0 {
                classes[flat(cell_of([i, j, k], cell), grid)].insert(*code);
                voxels.push([i, j, k]);
            }
        }
        let weights = voxels
            .iter()
            .map(|v| classes[flat(cell_of(*v, cell), grid)].len() as u32)
            .collect();
        ForegroundMap {
            shape,
            voxels,
            weights,
        }
    }

    /// Classes are the (possibly overlapping) masks of a multi-label set.
    pub fn from_masks(masks: &MaskSet, cell: usize) -> Result<Self> {
        let cell = cell.max(1);
        let shape = masks
            .values()
            .next()
            .map(|m| m.shape())
            .ok_or_else(|| Error::InvalidInput("no masks given".into()))?;
        if masks.values().any(|m| m.shape() != shape) {
            return Err(Error::ShapeMismatch("masks differ in shape".into()));
        }
        let grid = cell_grid(shape, cell);
        let mut counts = vec![0u32; grid.iter().product()];
        let mut any = ndarray::Array3::from_elem(shape, false);
        for m in masks.values() {
            let mut touched = vec![false; counts.len()];
            for ((i, j, k), set) in m.data.indexed_iter() {
                if *set {
                    touched[flat(cell_of([i, j, k], cell), grid)] = true;
                    any[[i, j, k]] = true;
                }
            }
            for (c, t) in counts.iter_mut().zip(touched) {
                *c += u32::from(t);
            }
        }
        let voxels: Vec<[usize; 3]> = any
            .indexed_iter()
            .filter(|(_, v)| **v)
            .map(|((i, j, k), _)| [i, j, k])
            .collect();
        let weights = voxels
            .iter()
            .map(|v| counts[flat(cell_of(*v, cell), grid)])
            .collect();
        Ok(ForegroundMap {
            shape,
            voxels,
            weights,
        })
    }

    pub fn shape(&self) -> [usize; 3] {
        self.shape
    }

    pub fn is_empty(&self) -> bool {
        self.voxels.is_empty()
    }

    /// Anchor weight of each foreground voxel, aligned with [`Self::voxels`].
    pub fn weights(&self) -> &[u32] {
        &self.weights
    }

    pub fn voxels(&self) -> &[[usize; 3]] {
        &self.voxels
    }

    /// Picks a patch: with probability `oversample_prob` one containing a
    /// weighted foreground anchor, otherwise a uniformly placed one.
    pub fn choose<R: Rng + ?Sized>(&self, extent: [usize; 3], oversample_prob: f64, rng: &mut R) -> Result<PatchChoice> {
        if extent.contains(&0) {
            return Err(Error::InvalidInput("patch extent must be positive".into()));
        }
        let padded = PatchSpec::padded_shape(self.shape, extent);
        let oversample = rng.random_bool(oversample_prob.clamp(0.0, 1.0));
        if oversample && !self.is_empty() {
            let index = WeightedIndex::new(&self.weights).map_err(|e| Error::InvalidInput(e.to_string()))?;
            let anchor = self.voxels[index.sample(rng)];
            let origin = std::array::from_fn(|a| {
                let lo = (anchor[a] + 1).saturating_sub(extent[a]);
                let hi = anchor[a].min(padded[a] - extent[a]);
                rng.random_range(lo..=hi)
            });
            return Ok(PatchChoice {
                spec: PatchSpec { origin, extent },
                anchor: Some(anchor),
                fell_back: false,
            });
        }
        if oversample {
            log::warn!("foreground oversampling requested on an empty label volume; using a uniform patch");
        }
        let origin = std::array::from_fn(|a| rng.random_range(0..=padded[a] - extent[a]));
        Ok(PatchChoice {
            spec: PatchSpec { origin, extent },
            anchor: None,
            fell_back: oversample,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PatchChoice {
    pub spec: PatchSpec,
    /// Foreground voxel the patch was built around, if any.
    pub anchor: Option<[usize; 3]>,
    /// Oversampling was requested but there was no foreground.
    pub fell_back: bool,
}

/// Chooses a patch for a label volume with the default multiplicity cell.
pub fn choose_patch<R: Rng + ?Sized>(
    l: &LabelVolume,
    extent: [usize; 3],
    oversample_prob: f64,
    rng: &mut R,
) -> Result<PatchChoice> {
    ForegroundMap::from_labels(l, DEFAULT_CELL).choose(extent, oversample_prob, rng)
}
