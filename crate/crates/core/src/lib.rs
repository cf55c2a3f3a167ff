//! Toolkit for text-prompted universal 3D medical segmentation outside the
//! training loop: volume preprocessing, cross-dataset label unification,
//! knowledge-pair construction, balanced sampling, reference forward kernels
//! with analytic loss gradients, and DSC/NSD evaluation.
//!
//! Modules map onto the processing stages:
//!
//! * [`volume`]: NIfTI I/O, reorientation, resampling, intensity normalization, cropping.
//! * [`labels`]: unified terminology catalog, class maps and merge rules.
//! * [`knowledge`]: concept/definition/relation pairs and visual concept pairs.
//! * [`sampler`]: dataset weights, repeat factors, patch selection, train/test splits.
//! * [`kernels`]: prompt encoding, ROI pooling, query decoder, mask generator, losses.
//! * [`metrics`]: DSC, NSD, exact distance transform, box baselines, aggregation.
//! * [`pipeline`]: manifest-driven harmonize/split/plan/eval/report and phantom data.

pub mod error;
pub mod geometry;
pub mod kernels;
pub mod knowledge;
pub mod labels;
pub mod mask;
pub mod metrics;
pub mod pipeline;
pub mod sampler;
pub mod volume;

pub use error::{Error, Result};
pub use geometry::{Affine, Axcodes};
pub use labels::{Catalog, ClassMap, MergeRule, Region, Terminology};
pub use mask::BinaryMask;
pub use volume::{LabelVolume, Modality, PatchSpec, Volume};

/// Version tag written into every JSON artifact.
pub const SCHEMA_VERSION: u32 = 1;
