use ndarray::{Array3, Axis};

use super::{LabelVolume, Volume};
use crate::error::Result;
use crate::geometry::{Affine, Axcodes};

/// Grids that can be reoriented by axis permutation and flips.
pub trait Reorient: Sized {
    fn reorient(&self, target: Axcodes) -> Result<Self>;
}

/// Plan mapping output axis `t` to input axis `source[t]`, optionally flipped.
struct AxisPlan {
    source: [usize; 3],
    flip: [bool; 3],
}

fn plan(affine: &Affine, target: Axcodes) -> Result<AxisPlan> {
    let current = affine.orientation()?;
    let wanted = target.world_axes();
    let mut source = [0usize; 3];
    let mut flip = [false; 3];
    for (t, (world, positive)) in wanted.iter().enumerate() {
        let (i, (_, cur_positive)) = current
            .iter()
            .enumerate()
            .find(|(_, (w, _))| w == world)
            .expect("orientation covers every world axis");
        source[t] = i;
        flip[t] = cur_positive != positive;
    }
    Ok(AxisPlan { source, flip })
}

fn apply<T: Clone>(data: &Array3<T>, affine: &Affine, plan: &AxisPlan) -> (Array3<T>, Affine) {
    let mut view = data.view();
    let shape = data.shape().to_vec();
    let mut m = affine.0;
    for t in 0..3 {
        let i = plan.source[t];
        if plan.flip[t] {
            view.invert_axis(Axis(i));
        }
        // Output column t is the (possibly negated) input column i.
        let sign = if plan.flip[t] { -1.0 } else { 1.0 };
        for r in 0..3 {
            m[(r, t)] = sign * affine.0[(r, i)];
        }
    }
    // Output voxel 0 sits at input index n-1 along every flipped axis.
    let mut origin = [0.0; 3];
    for t in 0..3 {
        let i = plan.source[t];
        if plan.flip[t] {
            origin[i] = (shape[i] - 1) as f64;
        }
    }
    let t = affine.apply(origin);
    for (r, v) in t.iter().enumerate() {
        m[(r, 3)] = *v;
    }
    let out = view
        .permuted_axes(plan.source)
        .as_standard_layout()
        .into_owned();
    (out, Affine(m))
}

impl Reorient for Volume {
    fn reorient(&self, target: Axcodes) -> Result<Self> {
        let p = plan(&self.affine, target)?;
        let (data, affine) = apply(&self.data, &self.affine, &p);
        Ok(Volume {
            data,
            affine,
            modality: self.modality,
        })
    }
}

impl Reorient for LabelVolume {
    fn reorient(&self, target: Axcodes) -> Result<Self> {
        let p = plan(&self.affine, target)?;
        let (data, affine) = apply(&self.data, &self.affine, &p);
        Ok(LabelVolume {
            data,
            affine,
            code_map: self.code_map.clone(),
        })
    }
}

/// Permutes and flips voxel axes so they run along `target`; no interpolation.
pub fn reorient<G: Reorient>(grid: &G, target: Axcodes) -> Result<G> {
    grid.reorient(target)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::volume::Modality;
    use crate::Error;
    use ndarray::Array3;

    fn vol(affine: Affine) -> Volume {
        let data = Array3::from_shape_fn((3, 4, 5), |(i, j, k)| (i * 100 + j * 10 + k) as f64);
        Volume::new(data, affine, Modality::CT).unwrap()
    }

    fn oblique() -> Affine {
        Affine::from_rows([
            [0.0, 0.0, -3.0, 12.0],
            [-1.5, 0.0, 0.0, 7.0],
            [0.0, 2.0, 0.0, -4.0],
            [0.0, 0.0, 0.0, 1.0],
        ])
    }

    #[test]
    fn target_orientation_is_identity() {
        let v = vol(Affine::from_spacing([1.0, 2.0, 3.0], [5.0, 6.0, 7.0]));
        assert_eq!(v.reorient(Axcodes::RAS).unwrap(), v);
    }

    #[test]
    fn single_flip_reverses_data_and_moves_origin() {
        let mut aff = Affine::from_spacing([1.0, 2.0, 3.0], [5.0, 6.0, 7.0]);
        aff.0[(0, 0)] = -1.0; // L
        let v = vol(aff);
        let r = v.reorient(Axcodes::RAS).unwrap();
        assert_eq!(r.data[[0, 1, 2]], v.data[[2, 1, 2]]);
        assert_eq!(r.affine.column(0), [1.0, 0.0, 0.0]);
        assert_eq!(r.affine.translation(), [3.0, 6.0, 7.0]);
    }

    #[test]
    fn every_voxel_keeps_its_world_position() {
        let v = vol(oblique());
        let r = v.reorient(Axcodes::RAS).unwrap();
        assert_eq!(r.axcodes().unwrap(), Axcodes::RAS);
        // Brute force: each output voxel value must be found at the input voxel
        // whose centre maps to the same world point.
        let inv = v.affine.inverse().unwrap();
        for ((i, j, k), val) in r.data.indexed_iter() {
            let w = r.affine.apply([i as f64, j as f64, k as f64]);
            let src = inv.apply(w).map(|x| x.round() as usize);
            assert_eq!(*val, v.data[src]);
            let back = v.affine.apply(src.map(|x| x as f64));
            for a in 0..3 {
                assert!((back[a] - w[a]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn round_trip_restores_volume() {
        let v = vol(oblique());
        let orig = v.axcodes().unwrap();
        let back = v.reorient(Axcodes::LPS).unwrap().reorient(orig).unwrap();
        assert_eq!(back.data, v.data);
        assert_eq!(back.affine, v.affine);
    }

    #[test]
    fn singular_affine_is_an_error() {
        let mut aff = Affine::identity();
        aff.0[(1, 1)] = 0.0;
        aff.0[(1, 0)] = 1.0;
        let v = Volume {
            data: Array3::zeros((2, 2, 2)),
            affine: aff,
            modality: Modality::CT,
        };
        assert!(matches!(v.reorient(Axcodes::RAS), Err(Error::SingularAffine)));
    }
}
