use ndarray::{Array3, Zip};

use super::edt::squared_distance_field;
use crate::error::{Error, Result};
use crate::mask::BinaryMask;

/// Dice similarity coefficient. Two empty masks score 1.
pub fn dsc(p: &BinaryMask, g: &BinaryMask) -> Result<f64> {
    p.check_same_grid(g)?;
    let (mut inter, mut total) = (0usize, 0usize);
    Zip::from(&p.data).and(&g.data).for_each(|a, b| {
        inter += usize::from(*a && *b);
        total += usize::from(*a) + usize::from(*b);
    });
    Ok(if total == 0 { 1.0 } else { 2.0 * inter as f64 / total as f64 })
}

/// Set voxels with at least one 6-neighbour outside the mask; the volume
/// border counts as outside.
pub fn boundary_voxels(m: &BinaryMask) -> BinaryMask {
    let d = &m.data;
    let sh = m.shape();
    let data = Array3::from_shape_fn(sh, |(i, j, k)| {
        if !d[[i, j, k]] {
            return false;
        }
        let idx = [i, j, k];
        (0..3).any(|a| {
            let lo = idx[a] == 0 || {
                let mut n = idx;
                n[a] -= 1;
                !d[n]
            };
            let hi = idx[a] + 1 == sh[a] || {
                let mut n = idx;
                n[a] += 1;
                !d[n]
            };
            lo || hi
        })
    });
    BinaryMask {
        data,
        spacing: m.spacing,
    }
}

/// Tolerance of the surface band.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Tolerance {
    /// Physical distance, using the masks' spacing.
    Mm(f64),
    /// Distance in voxel steps, ignoring spacing.
    Voxels(f64),
}

/// Normalized surface distance at tolerance `tau_mm`.
pub fn nsd(p: &BinaryMask, g: &BinaryMask, tau_mm: f64) -> Result<f64> {
    nsd_with(p, g, Tolerance::Mm(tau_mm))
}

/// Fraction of boundary voxels of either mask lying within the tolerance
/// of the other mask's boundary. Both empty scores 1, one empty scores 0.
pub fn nsd_with(p: &BinaryMask, g: &BinaryMask, tol: Tolerance) -> Result<f64> {
    p.check_same_grid(g)?;
    if p.spacing != g.spacing {
        return Err(Error::ShapeMismatch(format!("spacing {:?} vs {:?}", p.spacing, g.spacing)));
    }
    let (tau, spacing) = match tol {
        Tolerance::Mm(t) => (t, p.spacing),
        Tolerance::Voxels(t) => (t, [1.0; 3]),
    };
    if !(tau >= 0.0) {
        return Err(Error::InvalidInput(format!("tolerance {tau} must be non-negative")));
    }
    match (p.is_empty(), g.is_empty()) {
        (true, true) => return Ok(1.0),
        (true, false) | (false, true) => return Ok(0.0),
        _ => {}
    }
    let bp = boundary_voxels(p);
    let bg = boundary_voxels(g);
    let dp = squared_distance_field(bp.data.view(), spacing);
    let dg = squared_distance_field(bg.data.view(), spacing);
    let tau2 = tau * tau;
    let within = |b: &BinaryMask, d: &Array3<f64>| {
        Zip::from(&b.data)
            .and(d)
            .fold(0usize, |acc, set, d| acc + usize::from(*set && *d <= tau2))
    };
    let hits = within(&bp, &dg) + within(&bg, &dp);
    let total = bp.count() + bg.count();
    Ok(hits as f64 / total as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mask(shape: [usize; 3], spacing: [f64; 3], on: &[[usize; 3]]) -> BinaryMask {
        let mut m = BinaryMask::empty(shape, spacing);
        for v in on {
            m.data[*v] = true;
        }
        m
    }

    #[test]
    fn dsc_examples() {
        let a = mask([4, 4, 4], [1.0; 3], &[[1, 1, 1]]);
        let b = mask([4, 4, 4], [1.0; 3], &[[1, 1, 1], [2, 1, 1]]);
        let c = mask([4, 4, 4], [1.0; 3], &[[3, 3, 3]]);
        let e = BinaryMask::empty([4, 4, 4], [1.0; 3]);
        assert_eq!(dsc(&b, &b).unwrap(), 1.0);
        assert!((dsc(&a, &b).unwrap() - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(dsc(&a, &c).unwrap(), 0.0);
        assert_eq!(dsc(&e, &e).unwrap(), 1.0);
        assert!(dsc(&a, &BinaryMask::empty([4, 4, 3], [1.0; 3])).is_err());
    }

    #[test]
    fn cube_boundary_is_its_shell() {
        let mut m = BinaryMask::empty([5, 5, 5], [1.0; 3]);
        m.data.slice_mut(ndarray::s![1..4, 1..4, 1..4]).fill(true);
        let b = boundary_voxels(&m);
        assert_eq!(b.count(), 26);
        assert!(!b.data[[2, 2, 2]]);
        let single = mask([3, 3, 3], [1.0; 3], &[[0, 2, 1]]);
        assert_eq!(boundary_voxels(&single), single);
        // A full volume is all border.
        let full = BinaryMask::new(Array3::from_elem((3, 3, 3), true), [1.0; 3]).unwrap();
        assert_eq!(boundary_voxels(&full).count(), 26);
    }

    #[test]
    fn nsd_band_membership() {
        let a = mask([5, 5, 5], [1.0; 3], &[[2, 2, 2]]);
        let b = mask([5, 5, 5], [1.0; 3], &[[3, 2, 2]]);
        let c = mask([5, 5, 5], [1.0; 3], &[[4, 2, 2]]);
        assert_eq!(nsd(&a, &a, 1.0).unwrap(), 1.0);
        assert_eq!(nsd(&a, &b, 1.0).unwrap(), 1.0);
        assert_eq!(nsd(&a, &c, 1.0).unwrap(), 0.0);
        let e = BinaryMask::empty([5, 5, 5], [1.0; 3]);
        assert_eq!(nsd(&e, &e, 1.0).unwrap(), 1.0);
        assert_eq!(nsd(&a, &e, 1.0).unwrap(), 0.0);
    }

    #[test]
    fn nsd_tolerance_units() {
        let a = mask([5, 5, 5], [1.0, 1.0, 3.0], &[[2, 2, 1]]);
        let b = mask([5, 5, 5], [1.0, 1.0, 3.0], &[[2, 2, 2]]);
        assert_eq!(nsd(&a, &b, 1.0).unwrap(), 0.0);
        assert_eq!(nsd(&a, &b, 3.0).unwrap(), 1.0);
        assert_eq!(nsd_with(&a, &b, Tolerance::Voxels(1.0)).unwrap(), 1.0);
        let other = mask([5, 5, 5], [1.0; 3], &[[2, 2, 2]]);
        assert!(nsd(&a, &other, 1.0).is_err());
    }
}
