use super::{Modality, Volume};

/// CT intensity window in Hounsfield units.
pub const CT_WINDOW: (f64, f64) = (-500.0, 1000.0);
/// Lower and upper percentiles used to clip MRI (and PET) intensities.
pub const MR_PERCENTILES: (f64, f64) = (0.5, 99.5);

/// Percentile of `sorted` (ascending) with linear interpolation between
/// closest ranks, `q` in `[0, 100]`.
pub fn percentile(sorted: &[f64], q: f64) -> f64 {
    assert!(!sorted.is_empty(), "percentile of an empty sample");
    let pos = q / 100.0 * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let frac = pos - lo as f64;
    if hi == lo || frac == 0.0 {
        sorted[lo]
    } else {
        sorted[lo] + frac * (sorted[hi] - sorted[lo])
    }
}

fn clip_bounds(v: &Volume) -> (f64, f64) {
    match v.modality {
        Modality::CT => CT_WINDOW,
        Modality::MRI | Modality::PET => {
            let mut sorted: Vec<f64> = v.data.iter().copied().collect();
            sorted.sort_by(f64::total_cmp);
            (
                percentile(&sorted, MR_PERCENTILES.0),
                percentile(&sorted, MR_PERCENTILES.1),
            )
        }
    }
}

/// Clips intensities (fixed window for CT, percentiles otherwise) and
/// z-scores them with the population standard deviation. A constant volume
/// maps to all zeros.
pub fn normalize(v: &Volume) -> Volume {
    let (lo, hi) = clip_bounds(v);
    let clipped = v.data.mapv(|x| x.clamp(lo, hi));
    let n = clipped.len() as f64;
    let mean = clipped.iter().sum::<f64>() / n;
    let var = clipped.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    let std = var.sqrt();
    let data = if std > 0.0 && std.is_finite() {
        let mut z = clipped.mapv(|x| (x - mean) / std);
        // A second centring pass removes the rounding residue of the first.
        let residue = z.iter().sum::<f64>() / n;
        z.mapv_inplace(|x| x - residue);
        z
    } else {
        clipped.mapv(|_| 0.0)
    };
    Volume {
        data,
        affine: v.affine,
        modality: v.modality,
    }
}
