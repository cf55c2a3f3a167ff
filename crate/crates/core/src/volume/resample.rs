use ndarray::Array3;

use super::{LabelVolume, Volume};
use crate::error::{Error, Result};
use crate::geometry::Affine;

/// Resampling onto a new voxel spacing. Voxel 0 keeps its world position and
/// the voxel axes keep their directions.
pub trait Resample: Sized {
    fn resample(&self, target_spacing: [f64; 3]) -> Result<Self>;
}

/// Ratio of target to source spacing per axis, snapped to 1 when equal up to
/// floating error so a grid already at the target spacing is left untouched.
fn step_ratios(spacing: [f64; 3], target: [f64; 3]) -> Result<[f64; 3]> {
    if target.iter().any(|t| !(*t > 0.0) || !t.is_finite()) {
        return Err(Error::InvalidInput(format!(
            "target spacing must be positive, got {target:?}"
        )));
    }
    Ok(std::array::from_fn(|a| {
        let r = target[a] / spacing[a];
        if (r - 1.0).abs() < 1e-12 {
            1.0
        } else {
            r
        }
    }))
}

/// Output grid shape `ceil(shape * spacing / target)`.
pub fn resample_grid_shape(shape: [usize; 3], spacing: [f64; 3], target: [f64; 3]) -> [usize; 3] {
    std::array::from_fn(|a| {
        let extent = shape[a] as f64 * spacing[a] / target[a];
        // Tolerate representation error so 3 * 1.0 / 1.0 stays 3.
        (extent - 1e-9).ceil().max(0.0) as usize
    })
}

fn target_affine(affine: &Affine, ratios: [f64; 3]) -> Affine {
    let mut m = affine.0;
    for c in 0..3 {
        for r in 0..3 {
            m[(r, c)] = affine.0[(r, c)] * ratios[c];
        }
    }
    Affine(m)
}

fn plan(affine: &Affine, shape: [usize; 3], target: [f64; 3]) -> Result<([f64; 3], [usize; 3])> {
    let spacing = affine.spacing();
    let ratios = step_ratios(spacing, target)?;
    let out = resample_grid_shape(shape, spacing, target);
    if out.contains(&0) {
        return Err(Error::DegenerateOutput(out));
    }
    Ok((ratios, out))
}

fn lerp(a: f64, b: f64, t: f64) -> f64 {
    if t == 0.0 || a == b {
        return a;
    }
    let v = a + t * (b - a);
    v.clamp(a.min(b), a.max(b))
}

/// Source coordinate along one axis, clamped to the sampled range.
fn source_coord(j: usize, ratio: f64, n: usize) -> f64 {
    (j as f64 * ratio).clamp(0.0, (n - 1) as f64)
}

fn split(x: f64, n: usize) -> (usize, usize, f64) {
    let i0 = (x.floor() as usize).min(n - 1);
    let i1 = (i0 + 1).min(n - 1);
    (i0, i1, x - i0 as f64)
}

pub(crate) fn trilinear(data: &Array3<f64>, ratios: [f64; 3], out: [usize; 3]) -> Array3<f64> {
    let n = [data.shape()[0], data.shape()[1], data.shape()[2]];
    let axis_taps: Vec<Vec<(usize, usize, f64)>> = (0..3)
        .map(|a| {
            (0..out[a])
                .map(|j| split(source_coord(j, ratios[a], n[a]), n[a]))
                .collect()
        })
        .collect();
    Array3::from_shape_fn(out, |(i, j, k)| {
        let (x0, x1, fx) = axis_taps[0][i];
        let (y0, y1, fy) = axis_taps[1][j];
        let (z0, z1, fz) = axis_taps[2][k];
        let c00 = lerp(data[[x0, y0, z0]], data[[x1, y0, z0]], fx);
        let c10 = lerp(data[[x0, y1, z0]], data[[x1, y1, z0]], fx);
        let c01 = lerp(data[[x0, y0, z1]], data[[x1, y0, z1]], fx);
        let c11 = lerp(data[[x0, y1, z1]], data[[x1, y1, z1]], fx);
        lerp(lerp(c00, c10, fy), lerp(c01, c11, fy), fz)
    })
}

fn nearest<T: Copy>(data: &Array3<T>, ratios: [f64; 3], out: [usize; 3]) -> Array3<T> {
    let n = [data.shape()[0], data.shape()[1], data.shape()[2]];
    let idx: Vec<Vec<usize>> = (0..3)
        .map(|a| {
            (0..out[a])
                .map(|j| {
                    let x = source_coord(j, ratios[a], n[a]);
                    ((x + 0.5).floor() as usize).min(n[a] - 1)
                })
                .collect()
        })
        .collect();
    Array3::from_shape_fn(out, |(i, j, k)| data[[idx[0][i], idx[1][j], idx[2][k]]])
}

impl Resample for Volume {
    /// Trilinear interpolation.
    fn resample(&self, target_spacing: [f64; 3]) -> Result<Self> {
        let (ratios, out) = plan(&self.affine, self.shape(), target_spacing)?;
        let data = if ratios == [1.0; 3] && out == self.shape() {
            self.data.clone()
        } else {
            trilinear(&self.data, ratios, out)
        };
        Ok(Volume {
            data,
            affine: target_affine(&self.affine, ratios),
            modality: self.modality,
        })
    }
}

impl Resample for LabelVolume {
    /// Nearest-neighbour lookup; never invents codes.
    fn resample(&self, target_spacing: [f64; 3]) -> Result<Self> {
        let (ratios, out) = plan(&self.affine, self.shape(), target_spacing)?;
        Ok(LabelVolume {
            data: nearest(&self.data, ratios, out),
            affine: target_affine(&self.affine, ratios),
            code_map: self.code_map.clone(),
        })
    }
}
