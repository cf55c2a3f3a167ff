use ndarray::{Array2, ArrayView2, Zip};

use super::shape_err;
use crate::error::{Error, Result};

/// Probabilities are clamped to `[PROB_EPS, 1 - PROB_EPS]` inside the log terms.
pub const PROB_EPS: f64 = 1e-7;

#[derive(Debug, Clone, PartialEq)]
pub struct SegLoss {
    pub loss: f64,
    pub bce: f64,
    pub dice: f64,
    pub grad: Array2<f64>,
}

/// Binary cross-entropy plus soft dice for `M x C` probabilities `p` and
/// binary targets `s`.
///
/// BCE is the mean over all entries of `-(s ln p + (1-s) ln(1-p))` with `p`
/// clamped. The dice term is `1 - 2 sum(ps) / (sum(p^2) + sum(s^2))` over all
/// classes jointly on the unclamped `p`, and is 0 when both sums vanish.
pub fn bce_dice_loss(p: ArrayView2<f64>, s: ArrayView2<f64>) -> Result<SegLoss> {
    if p.dim() != s.dim() {
        return Err(shape_err("prediction vs target", s.dim(), p.dim()));
    }
    if let Some(bad) = s.iter().find(|v| **v != 0.0 && **v != 1.0) {
        return Err(Error::InvalidTarget(*bad));
    }
    if let Some(bad) = p.iter().find(|v| !(0.0..=1.0).contains(*v)) {
        return Err(Error::InvalidInput(format!("probability {bad} outside [0, 1]")));
    }
    let count = p.len().max(1) as f64;

    let mut bce = 0.0;
    let mut grad = Array2::zeros(p.dim());
    Zip::from(&mut grad).and(p).and(s).for_each(|g, &p, &s| {
        let pc = p.clamp(PROB_EPS, 1.0 - PROB_EPS);
        bce -= s * pc.ln() + (1.0 - s) * (1.0 - pc).ln();
        if pc == p {
            *g = (-s / pc + (1.0 - s) / (1.0 - pc)) / count;
        }
    });
    bce /= count;

    let inter: f64 = Zip::from(p).and(s).fold(0.0, |acc, p, s| acc + p * s);
    let denom = p.iter().map(|v| v * v).sum::<f64>() + s.iter().map(|v| v * v).sum::<f64>();
    let dice = if denom > 0.0 {
        Zip::from(&mut grad).and(p).and(s).for_each(|g, &p, &s| {
            *g += -2.0 * s / denom + 4.0 * inter * p / (denom * denom);
        });
        1.0 - 2.0 * inter / denom
    } else {
        0.0
    };
    Ok(SegLoss {
        loss: bce + dice,
        bce,
        dice,
        grad,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn perfect_prediction() {
        let s = array![[1.0, 0.0, 1.0], [0.0, 0.0, 1.0]];
        let out = bce_dice_loss(s.view(), s.view()).unwrap();
        assert_eq!(out.dice, 0.0);
        assert!(out.bce < 1e-6);
    }

    #[test]
    fn inverted_prediction_has_unit_dice() {
        let s = array![[1.0, 0.0, 1.0], [0.0, 0.0, 1.0]];
        let p = s.mapv(|v| 1.0 - v);
        assert_eq!(bce_dice_loss(p.view(), s.view()).unwrap().dice, 1.0);
    }

    #[test]
    fn all_zero_has_zero_dice() {
        let z = Array2::zeros((2, 2));
        let out = bce_dice_loss(z.view(), z.view()).unwrap();
        assert_eq!(out.dice, 0.0);
        assert!(out.grad.iter().all(|g| *g == 0.0));
    }

    #[test]
    fn non_binary_target_is_rejected() {
        let p = array![[0.5]];
        let s = array![[0.5]];
        assert!(matches!(bce_dice_loss(p.view(), s.view()), Err(Error::InvalidTarget(v)) if v == 0.5));
    }
}
