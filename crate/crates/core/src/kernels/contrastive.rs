use ndarray::{Array2, ArrayView2};

use super::shape_err;
use crate::error::{Error, Result};

pub const DEFAULT_TEMPERATURE: f64 = 0.07;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ContrastiveOptions {
    pub tau: f64,
    /// Keep the positive pair in the softmax denominator (the usual InfoNCE
    /// form). Off by default: only negatives are summed.
    pub include_positive: bool,
}

impl Default for ContrastiveOptions {
    fn default() -> Self {
        ContrastiveOptions {
            tau: DEFAULT_TEMPERATURE,
            include_positive: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ContrastiveLoss {
    pub loss: f64,
    pub grad_z: Array2<f64>,
    pub grad_z_prime: Array2<f64>,
}

/// Symmetric contrastive loss between row-paired batches `z` and `z_prime`.
///
/// With `S = z z'^T / tau`, row `i` contributes
/// `S_ii - lse_k S_ik` and `S_ii - lse_k S_ki`, the log-sum-exp running over
/// `k != i` unless `include_positive` is set. The loss is the negated mean
/// over rows of both terms.
pub fn contrastive_loss(z: ArrayView2<f64>, z_prime: ArrayView2<f64>, opts: ContrastiveOptions) -> Result<ContrastiveLoss> {
    let n = z.nrows();
    if n < 2 {
        return Err(Error::BatchTooSmall(n));
    }
    if z.dim() != z_prime.dim() {
        return Err(shape_err("paired batch", z.dim(), z_prime.dim()));
    }
    if !(opts.tau > 0.0 && opts.tau.is_finite()) {
        return Err(Error::InvalidInput(format!("temperature {} must be positive", opts.tau)));
    }
    if z.iter().chain(z_prime.iter()).any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput("contrastive inputs are not finite".into()));
    }
    let s = z.dot(&z_prime.t()) / opts.tau;
    let (loss, g) = similarity_loss(&s, opts.include_positive);
    Ok(ContrastiveLoss {
        loss,
        grad_z: g.dot(&z_prime) / opts.tau,
        grad_z_prime: g.t().dot(&z) / opts.tau,
    })
}

/// Softmax of `x` restricted to entries where `keep` holds; others get 0.
fn masked_softmax(x: impl Iterator<Item = f64> + Clone, keep: impl Fn(usize) -> bool) -> (f64, Vec<f64>) {
    let m = x
        .clone()
        .enumerate()
        .filter(|(k, _)| keep(*k))
        .map(|(_, v)| v)
        .fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = x.enumerate().map(|(k, v)| if keep(k) { (v - m).exp() } else { 0.0 }).collect();
    let sum: f64 = e.iter().sum();
    (m + sum.ln(), e.into_iter().map(|v| v / sum).collect())
}

/// Loss and `dL/dS` from the scaled similarity matrix.
fn similarity_loss(s: &Array2<f64>, include_positive: bool) -> (f64, Array2<f64>) {
    let n = s.nrows();
    let nf = n as f64;
    let mut total = 0.0;
    let mut g = Array2::zeros((n, n));
    for i in 0..n {
        let keep = |k: usize| include_positive || k != i;
        let (lse_row, p_row) = masked_softmax(s.row(i).iter().copied(), keep);
        let (lse_col, p_col) = masked_softmax(s.column(i).iter().copied(), keep);
        total += 2.0 * s[[i, i]] - lse_row - lse_col;
        g[[i, i]] -= 2.0 / nf;
        for k in 0..n {
            g[[i, k]] += p_row[k] / nf;
            g[[k, i]] += p_col[k] / nf;
        }
    }
    (-total / nf, g)
}
