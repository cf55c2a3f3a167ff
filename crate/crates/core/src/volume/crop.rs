use ndarray::{s, Array3};

use super::{LabelVolume, PatchSpec, Volume};
use crate::error::{Error, Result};

/// Inclusive-exclusive bounding box `(lo, hi)` of voxels with `|x| > 0`.
pub fn nonzero_bbox(data: &Array3<f64>) -> Option<([usize; 3], [usize; 3])> {
    let mut lo = [usize::MAX; 3];
    let mut hi = [0usize; 3];
    let mut any = false;
    for ((i, j, k), v) in data.indexed_iter() {
        if v.abs() > 0.0 {
            any = true;
            for (a, x) in [i, j, k].into_iter().enumerate() {
                lo[a] = lo[a].min(x);
                hi[a] = hi[a].max(x + 1);
            }
        }
    }
    any.then_some((lo, hi))
}

/// Crops both grids to the tight box of nonzero raw intensities. Must run
/// before normalization, which shifts the background away from zero.
pub fn crop_nonzero(v: &Volume, l: &LabelVolume) -> Result<(Volume, LabelVolume, [usize; 3])> {
    if v.shape() != l.shape() {
        return Err(Error::ShapeMismatch(format!(
            "image {:?} vs labels {:?}",
            v.shape(),
            l.shape()
        )));
    }
    let (lo, hi) = nonzero_bbox(&v.data).ok_or(Error::AllZeroVolume)?;
    let window = s![lo[0]..hi[0], lo[1]..hi[1], lo[2]..hi[2]];
    let affine = v.affine.shifted(lo);
    Ok((
        Volume {
            data: v.data.slice(window).to_owned(),
            affine,
            modality: v.modality,
        },
        LabelVolume {
            data: l.data.slice(window).to_owned(),
            affine: l.affine.shifted(lo),
            code_map: l.code_map.clone(),
        },
        lo,
    ))
}

fn window<T: Copy + Default>(data: &Array3<T>, spec: &PatchSpec) -> Array3<T> {
    let n = data.shape();
    Array3::from_shape_fn(spec.extent, |(i, j, k)| {
        let p = [spec.origin[0] + i, spec.origin[1] + j, spec.origin[2] + k];
        if p[0] < n[0] && p[1] < n[1] && p[2] < n[2] {
            data[p]
        } else {
            T::default()
        }
    })
}

/// Extracts a patch of exactly `spec.extent`; voxels beyond the grid are
/// filled with zero intensity and background label.
pub fn crop_patch(v: &Volume, l: &LabelVolume, spec: &PatchSpec) -> Result<(Volume, LabelVolume)> {
    if v.shape() != l.shape() {
        return Err(Error::ShapeMismatch(format!(
            "image {:?} vs labels {:?}",
            v.shape(),
            l.shape()
        )));
    }
    Ok((
        Volume {
            data: window(&v.data, spec),
            affine: v.affine.shifted(spec.origin),
            modality: v.modality,
        },
        LabelVolume {
            data: window(&l.data, spec),
            affine: l.affine.shifted(spec.origin),
            code_map: l.code_map.clone(),
        },
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Affine;
    use crate::volume::Modality;

    fn pair(data: Array3<f64>) -> (Volume, LabelVolume) {
        let labels = data.mapv(|x| u16::from(x > 0.5));
        (
            Volume::new(data, Affine::identity(), Modality::CT).unwrap(),
            LabelVolume::new(labels, Affine::identity()).unwrap(),
        )
    }

    #[test]
    fn fully_nonzero_volume_is_unchanged() {
        let (v, l) = pair(Array3::from_elem((3, 4, 5), 2.0));
        let (cv, cl, off) = crop_nonzero(&v, &l).unwrap();
        assert_eq!(off, [0, 0, 0]);
        assert_eq!(cv, v);
        assert_eq!(cl, l);
    }

    #[test]
    fn single_voxel_crop() {
        let mut data = Array3::zeros((8, 9, 10));
        data[[3, 4, 5]] = -1.0;
        let (v, l) = pair(data);
        let (cv, cl, off) = crop_nonzero(&v, &l).unwrap();
        assert_eq!(off, [3, 4, 5]);
        assert_eq!(cv.shape(), [1, 1, 1]);
        assert_eq!(cl.shape(), [1, 1, 1]);
        assert_eq!(cv.affine.translation(), [3.0, 4.0, 5.0]);
    }

    #[test]
    fn all_zero_is_an_error() {
        let (v, l) = pair(Array3::zeros((2, 2, 2)));
        assert!(matches!(crop_nonzero(&v, &l), Err(Error::AllZeroVolume)));
    }

    #[test]
    fn exact_patch_is_identity_and_small_volume_is_padded() {
        let (v, l) = pair(Array3::from_shape_fn((4, 4, 4), |(i, j, k)| (1 + i + j + k) as f64));
        let (pv, pl) = crop_patch(&v, &l, &PatchSpec::new([0; 3], [4; 3]).unwrap()).unwrap();
        assert_eq!(pv.data, v.data);
        assert_eq!(pl.data, l.data);

        let (v, l) = pair(Array3::from_elem((10, 10, 10), 3.0));
        let (pv, pl) = crop_patch(&v, &l, &PatchSpec::new([0; 3], [16; 3]).unwrap()).unwrap();
        assert_eq!(pv.shape(), [16, 16, 16]);
        for ((i, j, k), x) in pv.data.indexed_iter() {
            let inside = i < 10 && j < 10 && k < 10;
            assert_eq!(*x, if inside { 3.0 } else { 0.0 });
            assert_eq!(pl.data[[i, j, k]], u16::from(inside));
        }
    }
}
