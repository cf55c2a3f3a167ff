//! Reference forward kernels of the text-prompted segmentation model and the
//! two training losses with analytic gradients.
//!
//! Everything is plain `f64` ndarray code: slow, but small enough to check
//! against naive oracles and finite differences.

mod contrastive;
mod decoder;
mod embed;
mod maskgen;
mod params;
mod pool;
mod pyramid;
mod retrieval;
mod seg_loss;

pub use contrastive::{contrastive_loss, ContrastiveLoss, ContrastiveOptions, DEFAULT_TEMPERATURE};
pub use decoder::{cross_attention, layer_norm, query_decode, query_decode_traced, DecoderLayer, DecoderParams, DecoderTrace};
pub use embed::{encode_prompt, write_embedding_file, EmbeddingProvider, FileProvider, ToyHashProvider};
pub use maskgen::{generate_mask, generate_masks, sigmoid};
pub use params::TensorSet;
pub use pool::{max_pool_mask, roi_pool, RoiPooler};
pub use pyramid::{FeaturePyramid, ToyEncoder};
pub use retrieval::recall_at_k;
pub use seg_loss::{bce_dice_loss, SegLoss, PROB_EPS};

use ndarray::{Array1, Array4, ArrayView3};

use crate::error::Result;

/// Text embedding width.
pub const DEFAULT_DIM: usize = 768;
/// Per-voxel dense feature width.
pub const DEFAULT_DENSE_DIM: usize = 64;
pub const DEFAULT_LAYERS: usize = 6;
pub const DEFAULT_HEADS: usize = 8;

pub type Embedding = Array1<f64>;

pub(crate) fn shape_err(what: &str, expected: impl std::fmt::Debug, got: impl std::fmt::Debug) -> crate::Error {
    crate::Error::ShapeMismatch(format!("{what}: expected {expected:?}, got {got:?}"))
}

/// Toy end-to-end model: hashed prompts, toy visual encoder, query decoder
/// and mask generator wired together.
#[derive(Debug, Clone)]
pub struct ToyModel {
    pub provider: ToyHashProvider,
    pub encoder: ToyEncoder,
    pub decoder: DecoderParams,
}

impl ToyModel {
    pub fn new(dim: usize, dense_dim: usize, levels: usize, seed: u64) -> Result<Self> {
        let encoder = ToyEncoder::new(levels, dense_dim, seed);
        let decoder = DecoderParams::random(
            dim,
            2 * dim,
            dense_dim,
            &encoder.level_dims(),
            DEFAULT_LAYERS,
            DEFAULT_HEADS,
            seed.wrapping_add(1),
        )?;
        Ok(ToyModel {
            provider: ToyHashProvider::new(dim, seed),
            encoder,
            decoder,
        })
    }

    /// One score map per prompt, each with the patch's spatial shape.
    pub fn segment(&self, patch: ArrayView3<f64>, prompts: &[&str]) -> Result<Array4<f64>> {
        let pyramid = self.encoder.pyramid(patch)?;
        let dense = self.encoder.dense(patch);
        let mut z = ndarray::Array2::zeros((prompts.len(), self.provider.dim()));
        for (mut row, p) in z.rows_mut().into_iter().zip(prompts) {
            row.assign(&encode_prompt(p, &self.provider)?);
        }
        let q = query_decode(&pyramid, z.view(), &self.decoder)?;
        generate_masks(q.view(), dense.view(), self.decoder.g.view())
    }
}
