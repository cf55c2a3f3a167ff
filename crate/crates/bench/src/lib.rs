//! Seeded inputs shared by the benchmarks.

use ndarray::{Array3, Array4};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use segkit::{Affine, BinaryMask, Modality, Volume};

/// Random blob mask: a ball with each voxel flipped with probability `noise`.
pub fn blob_mask(n: usize, spacing: [f64; 3], noise: f64, seed: u64) -> BinaryMask {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let c = n as f64 / 2.0;
    let r = n as f64 / 3.0;
    let data = Array3::from_shape_fn((n, n, n), |(i, j, k)| {
        let d2 = [i, j, k].iter().map(|x| (*x as f64 - c).powi(2)).sum::<f64>();
        (d2 <= r * r) ^ rng.random_bool(noise)
    });
    BinaryMask::new(data, spacing).unwrap()
}

pub fn ct_volume(shape: [usize; 3], spacing: [f64; 3], seed: u64) -> Volume {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let data = Array3::from_shape_fn((shape[0], shape[1], shape[2]), |_| rng.random_range(-1000.0..1500.0));
    Volume::new(data, Affine::from_spacing(spacing, [0.0; 3]), Modality::CT).unwrap()
}

pub fn gaussian4(shape: [usize; 4], seed: u64) -> Array4<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Array4::from_shape_fn((shape[0], shape[1], shape[2], shape[3]), |_| rng.random_range(-1.0..1.0))
}
