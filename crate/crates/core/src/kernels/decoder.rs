use ndarray::{concatenate, s, Array1, Array2, ArrayView1, ArrayView2, Axis};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::{shape_err, FeaturePyramid, TensorSet};
use crate::error::{Error, Result};

const LN_EPS: f64 = 1e-5;

/// One decoder block: multi-head cross-attention and a ReLU feed-forward,
/// each followed by a residual add and layer norm.
#[derive(Debug, Clone, PartialEq)]
pub struct DecoderLayer {
    pub wq: Array2<f64>,
    pub wk: Array2<f64>,
    pub wv: Array2<f64>,
    pub wo: Array2<f64>,
    pub w1: Array2<f64>,
    pub b1: Array1<f64>,
    pub w2: Array2<f64>,
    pub b2: Array1<f64>,
    pub ln1: (Array1<f64>, Array1<f64>),
    pub ln2: (Array1<f64>, Array1<f64>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct DecoderParams {
    pub heads: usize,
    /// Per pyramid level, `d x channels` map of visual features to width `d`.
    pub level_proj: Vec<Array2<f64>>,
    pub layers: Vec<DecoderLayer>,
    /// `d' x d` projection applied to decoded queries before the mask dot product.
    pub g: Array2<f64>,
    pub seed: u64,
}

fn gaussian(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> Array2<f64> {
    let normal = Normal::new(0.0, 1.0 / (cols as f64).sqrt()).unwrap();
    Array2::from_shape_fn((rows, cols), |_| normal.sample(rng))
}

impl DecoderParams {
    pub fn random(
        dim: usize,
        ff_dim: usize,
        dense_dim: usize,
        level_dims: &[usize],
        layers: usize,
        heads: usize,
        seed: u64,
    ) -> Result<Self> {
        if heads == 0 || dim == 0 || dim % heads != 0 {
            return Err(Error::InvalidConfig(format!("width {dim} is not divisible into {heads} heads")));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let level_proj = level_dims.iter().map(|c| gaussian(dim, *c, &mut rng)).collect();
        let layers = (0..layers)
            .map(|_| DecoderLayer {
                wq: gaussian(dim, dim, &mut rng),
                wk: gaussian(dim, dim, &mut rng),
                wv: gaussian(dim, dim, &mut rng),
                wo: gaussian(dim, dim, &mut rng),
                w1: gaussian(ff_dim, dim, &mut rng),
                b1: Array1::zeros(ff_dim),
                w2: gaussian(dim, ff_dim, &mut rng),
                b2: Array1::zeros(dim),
                ln1: (Array1::ones(dim), Array1::zeros(dim)),
                ln2: (Array1::ones(dim), Array1::zeros(dim)),
            })
            .collect();
        let g = gaussian(dense_dim, dim, &mut rng);
        let p = DecoderParams {
            heads,
            level_proj,
            layers,
            g,
            seed,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn dim(&self) -> usize {
        self.g.ncols()
    }

    pub fn dense_dim(&self) -> usize {
        self.g.nrows()
    }

    pub fn validate(&self) -> Result<()> {
        let d = self.dim();
        if self.heads == 0 || d % self.heads != 0 {
            return Err(Error::InvalidConfig(format!("width {d} is not divisible into {} heads", self.heads)));
        }
        for (i, p) in self.level_proj.iter().enumerate() {
            if p.nrows() != d {
                return Err(shape_err(&format!("level projection {i} rows"), d, p.nrows()));
            }
        }
        for (i, l) in self.layers.iter().enumerate() {
            let f = l.w1.nrows();
            let checks = [
                ("wq", l.wq.dim(), (d, d)),
                ("wk", l.wk.dim(), (d, d)),
                ("wv", l.wv.dim(), (d, d)),
                ("wo", l.wo.dim(), (d, d)),
                ("w1", l.w1.dim(), (f, d)),
                ("w2", l.w2.dim(), (d, f)),
            ];
            for (name, got, want) in checks {
                if got != want {
                    return Err(shape_err(&format!("layer {i} {name}"), want, got));
                }
            }
            let vecs = [(&l.b1, f), (&l.b2, d), (&l.ln1.0, d), (&l.ln1.1, d), (&l.ln2.0, d), (&l.ln2.1, d)];
            if vecs.iter().any(|(v, n)| v.len() != *n) {
                return Err(shape_err(&format!("layer {i} bias/norm"), d, "other"));
            }
        }
        Ok(())
    }

    pub fn to_tensors(&self) -> TensorSet {
        let mut t = TensorSet::new(self.seed);
        t.push_scalar("heads", self.heads as f64);
        for (i, p) in self.level_proj.iter().enumerate() {
            t.push(&format!("level_proj.{i}"), p.clone().into_dyn());
        }
        for (i, l) in self.layers.iter().enumerate() {
            let mats = [("wq", &l.wq), ("wk", &l.wk), ("wv", &l.wv), ("wo", &l.wo), ("w1", &l.w1), ("w2", &l.w2)];
            for (name, m) in mats {
                t.push(&format!("layers.{i}.{name}"), m.clone().into_dyn());
            }
            let vecs = [("b1", &l.b1), ("b2", &l.b2), ("ln1.gamma", &l.ln1.0), ("ln1.beta", &l.ln1.1), ("ln2.gamma", &l.ln2.0), ("ln2.beta", &l.ln2.1)];
            for (name, v) in vecs {
                t.push(&format!("layers.{i}.{name}"), v.clone().into_dyn());
            }
        }
        t.push("g", self.g.clone().into_dyn());
        t
    }

    pub fn from_tensors(t: &TensorSet) -> Result<Self> {
        let heads = t.scalar("heads")? as usize;
        let mut level_proj = Vec::new();
        while let Some(p) = t.get_opt(&format!("level_proj.{}", level_proj.len())) {
            level_proj.push(TensorSet::as2(p)?);
        }
        let mut layers = Vec::new();
        while t.get_opt(&format!("layers.{}.wq", layers.len())).is_some() {
            let i = layers.len();
            let m = |n: &str| t.matrix(&format!("layers.{i}.{n}"));
            let v = |n: &str| t.vector(&format!("layers.{i}.{n}"));
            layers.push(DecoderLayer {
                wq: m("wq")?,
                wk: m("wk")?,
                wv: m("wv")?,
                wo: m("wo")?,
                w1: m("w1")?,
                b1: v("b1")?,
                w2: m("w2")?,
                b2: v("b2")?,
                ln1: (v("ln1.gamma")?, v("ln1.beta")?),
                ln2: (v("ln2.gamma")?, v("ln2.beta")?),
            });
        }
        let p = DecoderParams {
            heads,
            level_proj,
            layers,
            g: t.matrix("g")?,
            seed: t.seed,
        };
        p.validate()?;
        Ok(p)
    }
}

/// Row-wise layer normalization with affine `(gamma, beta)`.
pub fn layer_norm(x: ArrayView2<f64>, gamma: ArrayView1<f64>, beta: ArrayView1<f64>) -> Array2<f64> {
    let mut out = x.to_owned();
    for mut row in out.rows_mut() {
        let mean = row.mean().unwrap_or(0.0);
        row -= mean;
        let var = row.iter().map(|v| v * v).sum::<f64>() / row.len() as f64;
        row /= (var + LN_EPS).sqrt();
        row *= &gamma;
        row += &beta;
    }
    out
}

fn softmax_rows(a: &mut Array2<f64>) {
    for mut row in a.rows_mut() {
        let m = row.fold(f64::NEG_INFINITY, |a, b| a.max(*b));
        row.mapv_inplace(|v| (v - m).exp());
        let sum = row.sum();
        row /= sum;
    }
}

/// Multi-head scaled dot-product attention of queries `q` (`m x d`) over
/// `memory` (`P x d`). Returns the output-projected result and the
/// attention weights of every head (`m x P`, rows summing to 1).
pub fn cross_attention(q: ArrayView2<f64>, memory: ArrayView2<f64>, layer: &DecoderLayer, heads: usize) -> (Array2<f64>, Vec<Array2<f64>>) {
    let d = q.ncols();
    let dh = d / heads;
    let scale = 1.0 / (dh as f64).sqrt();
    let qp = q.dot(&layer.wq.t());
    let kp = memory.dot(&layer.wk.t());
    let vp = memory.dot(&layer.wv.t());
    let mut concat = Array2::zeros((q.nrows(), d));
    let mut weights = Vec::with_capacity(heads);
    for h in 0..heads {
        let cols = s![.., h * dh..(h + 1) * dh];
        let mut a = qp.slice(cols).dot(&kp.slice(cols).t()) * scale;
        softmax_rows(&mut a);
        concat.slice_mut(cols).assign(&a.dot(&vp.slice(cols)));
        weights.push(a);
    }
    (concat.dot(&layer.wo.t()), weights)
}

fn memory(pyramid: &FeaturePyramid, params: &DecoderParams) -> Result<Array2<f64>> {
    if pyramid.levels().len() > params.level_proj.len() {
        return Err(shape_err("pyramid levels", params.level_proj.len(), pyramid.levels().len()));
    }
    let mut parts = Vec::new();
    for (i, (level, proj)) in pyramid.levels().iter().zip(&params.level_proj).enumerate() {
        let c = level.shape()[3];
        if proj.ncols() != c {
            return Err(shape_err(&format!("level {i} channels"), proj.ncols(), c));
        }
        let flat = level.to_shape((level.len() / c, c)).unwrap();
        parts.push(flat.dot(&proj.t()));
    }
    let views: Vec<_> = parts.iter().map(|p| p.view()).collect();
    Ok(concatenate(Axis(0), &views).unwrap())
}

#[derive(Debug, Clone, PartialEq)]
pub struct DecoderTrace {
    pub queries: Array2<f64>,
    /// `attention[layer][head]` is `m x P`.
    pub attention: Vec<Vec<Array2<f64>>>,
}

fn decode(memory: ArrayView2<f64>, z: ArrayView2<f64>, params: &DecoderParams, trace: bool) -> Result<DecoderTrace> {
    if z.ncols() != params.dim() {
        return Err(shape_err("prompt width", params.dim(), z.ncols()));
    }
    let mut x = z.to_owned();
    let mut attention = Vec::new();
    for layer in &params.layers {
        let (a, w) = cross_attention(x.view(), memory, layer, params.heads);
        if trace {
            attention.push(w);
        }
        x = layer_norm((&x + &a).view(), layer.ln1.0.view(), layer.ln1.1.view());
        let mut h = x.dot(&layer.w1.t()) + &layer.b1;
        h.mapv_inplace(|v| v.max(0.0));
        let f = h.dot(&layer.w2.t()) + &layer.b2;
        x = layer_norm((&x + &f).view(), layer.ln2.0.view(), layer.ln2.1.view());
    }
    Ok(DecoderTrace { queries: x, attention })
}

/// Decodes a batch of prompt embeddings (`m x d`) against the flattened
/// positions of every pyramid level.
pub fn query_decode(pyramid: &FeaturePyramid, z: ArrayView2<f64>, params: &DecoderParams) -> Result<Array2<f64>> {
    let mem = memory(pyramid, params)?;
    Ok(decode(mem.view(), z, params, false)?.queries)
}

/// [`query_decode`] that also keeps every attention matrix.
pub fn query_decode_traced(pyramid: &FeaturePyramid, z: ArrayView2<f64>, params: &DecoderParams) -> Result<DecoderTrace> {
    let mem = memory(pyramid, params)?;
    decode(mem.view(), z, params, true)
}

#[cfg(test)]
pub(crate) fn decode_memory(memory: ArrayView2<f64>, z: ArrayView2<f64>, params: &DecoderParams) -> Array2<f64> {
    decode(memory, z, params, false).unwrap().queries
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::Array4;
    use rand::{Rng, SeedableRng};

    fn params(d: usize, levels: &[usize], seed: u64) -> DecoderParams {
        DecoderParams::random(d, 2 * d, 8, levels, 6, 8, seed).unwrap()
    }

    #[test]
    fn single_position_returns_its_value_projection() {
        let p = params(16, &[4], 0);
        let l = &p.layers[0];
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mem = Array2::from_shape_fn((1, 16), |_| rng.random_range(-1.0..1.0));
        let want = mem.dot(&l.wv.t()).dot(&l.wo.t());
        for _ in 0..5 {
            let q = Array2::from_shape_fn((3, 16), |_| rng.random_range(-5.0..5.0));
            let (out, w) = cross_attention(q.view(), mem.view(), l, 8);
            assert!(w.iter().all(|a| a.iter().all(|v| *v == 1.0)));
            for row in out.rows() {
                for (a, b) in row.iter().zip(want.row(0)) {
                    assert!((a - b).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn attention_rows_sum_to_one_and_order_does_not_matter() {
        let p = params(32, &[4, 6], 1);
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let a = Array4::from_shape_fn((4, 4, 2, 4), |_| rng.random_range(-1.0..1.0));
        let b = Array4::from_shape_fn((2, 2, 1, 6), |_| rng.random_range(-1.0..1.0));
        let pyr = FeaturePyramid::new(vec![a, b], vec![[1; 3], [2; 3]]).unwrap();
        let z = Array2::from_shape_fn((5, 32), |_| rng.random_range(-1.0..1.0));
        let t = query_decode_traced(&pyr, z.view(), &p).unwrap();
        assert_eq!(t.attention.len(), 6);
        for head in t.attention.iter().flatten() {
            assert_eq!(head.dim(), (5, 36));
            for row in head.rows() {
                assert!((row.sum() - 1.0).abs() <= 1e-12);
            }
        }
        let mem = memory(&pyr, &p).unwrap();
        let mut order: Vec<usize> = (0..mem.nrows()).collect();
        order.reverse();
        order.swap(0, 17);
        let shuffled = mem.select(Axis(0), &order);
        let x = decode_memory(shuffled.view(), z.view(), &p);
        for (u, v) in x.iter().zip(&t.queries) {
            assert!((u - v).abs() <= 1e-12);
        }
    }

    #[test]
    fn large_inputs_stay_finite() {
        let p = params(16, &[4], 2);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let a = Array4::from_shape_fn((3, 3, 3, 4), |_| rng.random_range(-1e3..1e3));
        let pyr = FeaturePyramid::new(vec![a], vec![[1; 3]]).unwrap();
        let z = Array2::from_shape_fn((2, 16), |_| rng.random_range(-1e3..1e3));
        let q = query_decode(&pyr, z.view(), &p).unwrap();
        assert!(q.iter().all(|v| v.is_finite()));
    }

    #[test]
    fn rejects_bad_shapes() {
        assert!(DecoderParams::random(10, 20, 4, &[3], 6, 8, 0).is_err());
        let p = params(16, &[4], 0);
        let pyr = FeaturePyramid::new(vec![Array4::zeros((2, 2, 2, 5))], vec![[1; 3]]).unwrap();
        let z = Array2::zeros((1, 16));
        assert!(matches!(query_decode(&pyr, z.view(), &p), Err(Error::ShapeMismatch(_))));
        let pyr = FeaturePyramid::new(vec![Array4::zeros((2, 2, 2, 4))], vec![[1; 3]]).unwrap();
        let z = Array2::zeros((1, 15));
        assert!(matches!(query_decode(&pyr, z.view(), &p), Err(Error::ShapeMismatch(_))));
    }
}
