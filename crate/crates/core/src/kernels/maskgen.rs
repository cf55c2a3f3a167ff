use ndarray::{Array3, Array4, ArrayView1, ArrayView2, ArrayView4, Axis};

use super::shape_err;
use crate::error::Result;

/// Per-voxel score `<g q, u(v)>` for one decoded query `q` and dense
/// features `u` (`H x W x D x d'`). `g` is `d' x d`.
pub fn generate_mask(q: ArrayView1<f64>, u: ArrayView4<f64>, g: ArrayView2<f64>) -> Result<Array3<f64>> {
    if g.ncols() != q.len() {
        return Err(shape_err("query width", g.ncols(), q.len()));
    }
    if u.shape()[3] != g.nrows() {
        return Err(shape_err("dense feature width", g.nrows(), u.shape()[3]));
    }
    let gq = g.dot(&q);
    let sh = u.shape();
    let mut out = Array3::zeros((sh[0], sh[1], sh[2]));
    for (o, lane) in out.iter_mut().zip(u.lanes(Axis(3))) {
        *o = lane.dot(&gq);
    }
    Ok(out)
}

/// [`generate_mask`] for each row of `q`, stacked along a leading axis.
pub fn generate_masks(q: ArrayView2<f64>, u: ArrayView4<f64>, g: ArrayView2<f64>) -> Result<Array4<f64>> {
    let sh = u.shape();
    let mut out = Array4::zeros((q.nrows(), sh[0], sh[1], sh[2]));
    for (mut slot, row) in out.outer_iter_mut().zip(q.rows()) {
        slot.assign(&generate_mask(row, u, g)?);
    }
    Ok(out)
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}
