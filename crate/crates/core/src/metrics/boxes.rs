use ndarray::{Axis, Slice};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mask::BinaryMask;

/// Slice axis used by the box baselines.
pub const AXIAL: usize = 2;
/// Largest corner shift of a loose box, as a fraction of the image size.
pub const LOOSE_SHIFT_FRAC: f64 = 0.08;

/// Inclusive rectangle on one slice. `min`/`max` index the two in-plane
/// axes in increasing axis order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SliceBox {
    pub slice: usize,
    pub min: [usize; 2],
    pub max: [usize; 2],
}

fn plane_axes(axis: usize) -> Result<[usize; 2]> {
    match axis {
        0 => Ok([1, 2]),
        1 => Ok([0, 2]),
        2 => Ok([0, 1]),
        _ => Err(Error::InvalidInput(format!("slice axis {axis} out of range"))),
    }
}

/// Minimal rectangle around the foreground of every non-empty slice.
pub fn tight_box(g: &BinaryMask, axis: usize) -> Result<Vec<SliceBox>> {
    plane_axes(axis)?;
    let mut out = Vec::new();
    for (s, plane) in g.data.axis_iter(Axis(axis)).enumerate() {
        let mut b: Option<SliceBox> = None;
        for ((r, c), set) in plane.indexed_iter() {
            if !*set {
                continue;
            }
            let b = b.get_or_insert(SliceBox {
                slice: s,
                min: [r, c],
                max: [r, c],
            });
            b.min = [b.min[0].min(r), b.min[1].min(c)];
            b.max = [b.max[0].max(r), b.max[1].max(c)];
        }
        out.extend(b);
    }
    Ok(out)
}

/// Perturbs every corner of every rectangle independently by a uniform
/// integer offset of at most `floor(max_shift_frac * size)` per in-plane
/// axis, then clamps to the image and reorders so `min <= max`.
pub fn loose_box(rects: &[SliceBox], shape: [usize; 3], axis: usize, max_shift_frac: f64, seed: u64) -> Result<Vec<SliceBox>> {
    let plane = plane_axes(axis)?;
    if !(0.0..1.0).contains(&max_shift_frac) {
        return Err(Error::InvalidInput(format!("shift fraction {max_shift_frac} outside [0, 1)")));
    }
    let size = plane.map(|a| shape[a]);
    let bound = size.map(|r| (max_shift_frac * r as f64).floor() as i64);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let shift = |v: usize, a: usize, rng: &mut ChaCha8Rng| {
        let d = if bound[a] > 0 { rng.random_range(-bound[a]..=bound[a]) } else { 0 };
        (v as i64 + d).clamp(0, size[a] as i64 - 1) as usize
    };
    Ok(rects
        .iter()
        .map(|r| {
            let mut lo = [0; 2];
            let mut hi = [0; 2];
            for a in 0..2 {
                lo[a] = shift(r.min[a], a, &mut rng);
            }
            for a in 0..2 {
                hi[a] = shift(r.max[a], a, &mut rng);
            }
            SliceBox {
                slice: r.slice,
                min: [lo[0].min(hi[0]), lo[1].min(hi[1])],
                max: [lo[0].max(hi[0]), lo[1].max(hi[1])],
            }
        })
        .collect())
}

/// Fills every rectangle on its slice; rectangles are clipped to the grid.
pub fn box_as_prediction(rects: &[SliceBox], shape: [usize; 3], spacing: [f64; 3], axis: usize) -> Result<BinaryMask> {
    let plane = plane_axes(axis)?;
    let mut m = BinaryMask::new(ndarray::Array3::from_elem(shape, false), spacing)?;
    for r in rects {
        if r.slice >= shape[axis] {
            continue;
        }
        let mut view = m.data.index_axis_mut(Axis(axis), r.slice);
        for a in 0..2 {
            let hi = (r.max[a] + 1).min(shape[plane[a]]);
            let lo = r.min[a].min(hi);
            view.slice_axis_inplace(Axis(a), Slice::from(lo..hi));
        }
        view.fill(true);
    }
    Ok(m)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::dsc;

    #[test]
    fn single_voxel_box() {
        let mut m = BinaryMask::empty([4, 5, 6], [1.0; 3]);
        m.data[[2, 3, 4]] = true;
        assert_eq!(
            tight_box(&m, AXIAL).unwrap(),
            vec![SliceBox {
                slice: 4,
                min: [2, 3],
                max: [2, 3]
            }]
        );
    }

    #[test]
    fn l_shape_box_and_oracle_dsc() {
        let mut m = BinaryMask::empty([8, 8, 1], [1.0; 3]);
        for r in 2..=5 {
            m.data[[r, 1, 0]] = true;
        }
        for c in 1..=4 {
            m.data[[5, c, 0]] = true;
        }
        let b = tight_box(&m, AXIAL).unwrap();
        assert_eq!((b[0].min, b[0].max), ([2, 1], [5, 4]));

        let mut l = BinaryMask::empty([3, 3, 1], [1.0; 3]);
        l.data[[0, 0, 0]] = true;
        l.data[[1, 0, 0]] = true;
        l.data[[1, 1, 0]] = true;
        let pred = box_as_prediction(&tight_box(&l, AXIAL).unwrap(), [3, 3, 1], [1.0; 3], AXIAL).unwrap();
        assert!((dsc(&pred, &l).unwrap() - 6.0 / 7.0).abs() < 1e-15);
    }

    #[test]
    fn rectangular_truth_is_recovered() {
        let mut m = BinaryMask::empty([6, 6, 4], [1.0; 3]);
        m.data.slice_mut(ndarray::s![1..4, 2..6, 1..3]).fill(true);
        for axis in 0..3 {
            let pred = box_as_prediction(&tight_box(&m, axis).unwrap(), [6, 6, 4], [1.0; 3], axis).unwrap();
            assert_eq!(pred, m);
        }
    }

    #[test]
    fn loose_box_behaviour() {
        let rects = vec![
            SliceBox {
                slice: 0,
                min: [0, 3],
                max: [9, 5],
            };
            20
        ];
        assert_eq!(loose_box(&rects, [10, 10, 1], AXIAL, 0.0, 1).unwrap(), rects);
        let a = loose_box(&rects, [10, 10, 1], AXIAL, 0.5, 7).unwrap();
        assert_eq!(a, loose_box(&rects, [10, 10, 1], AXIAL, 0.5, 7).unwrap());
        for r in &a {
            assert!(r.min[0] <= r.max[0] && r.min[1] <= r.max[1]);
            assert!(r.max[0] <= 9 && r.max[1] <= 9);
            assert!(r.min[1] + 5 >= 3 && r.max[1] <= 5 + 5);
        }
        assert!(loose_box(&rects, [10, 10, 1], AXIAL, 1.0, 7).is_err());
    }
}
