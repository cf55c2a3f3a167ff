use ndarray::{Array3, ArrayView3, Axis};

use crate::error::{Error, Result};
use crate::mask::BinaryMask;

/// Lower envelope of parabolas `w (q - p)^2 + f(p)` over sites with finite
/// `f`, written back into `f`.
fn envelope_1d(f: &mut [f64], w: f64, v: &mut Vec<usize>, z: &mut Vec<f64>, out: &mut Vec<f64>) {
    v.clear();
    z.clear();
    let n = f.len();
    for q in 0..n {
        if !f[q].is_finite() {
            continue;
        }
        let hq = f[q] + w * (q * q) as f64;
        loop {
            let Some(&p) = v.last() else {
                v.push(q);
                z.push(f64::NEG_INFINITY);
                break;
            };
            let hp = f[p] + w * (p * p) as f64;
            let s = (hq - hp) / (2.0 * w * (q - p) as f64);
            if s <= *z.last().unwrap() {
                v.pop();
                z.pop();
            } else {
                v.push(q);
                z.push(s);
                break;
            }
        }
    }
    if v.is_empty() {
        return;
    }
    out.clear();
    let mut k = 0;
    for q in 0..n {
        while k + 1 < v.len() && z[k + 1] < q as f64 {
            k += 1;
        }
        let d = q.abs_diff(v[k]) as f64;
        out.push(w * d * d + f[v[k]]);
    }
    f.copy_from_slice(out);
}

/// Exact squared Euclidean distance (mm^2) from every voxel centre to the
/// nearest set voxel centre. Voxels are infinite when nothing is set.
pub fn squared_distance_field(m: ArrayView3<bool>, spacing: [f64; 3]) -> Array3<f64> {
    let mut f = m.mapv(|b| if b { 0.0 } else { f64::INFINITY });
    let (mut v, mut z, mut out) = (Vec::new(), Vec::new(), Vec::new());
    let mut buf = Vec::new();
    for (axis, s) in spacing.iter().enumerate() {
        let w = s * s;
        for mut lane in f.lanes_mut(Axis(axis)) {
            buf.clear();
            buf.extend(lane.iter().copied());
            envelope_1d(&mut buf, w, &mut v, &mut z, &mut out);
            for (dst, src) in lane.iter_mut().zip(&buf) {
                *dst = *src;
            }
        }
    }
    f
}

/// Euclidean distance (mm) to the nearest set voxel.
pub fn distance_field(m: &BinaryMask) -> Result<Array3<f64>> {
    if m.is_empty() {
        return Err(Error::EmptyMask);
    }
    Ok(squared_distance_field(m.data.view(), m.spacing).mapv(f64::sqrt))
}
