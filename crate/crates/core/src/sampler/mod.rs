//! Dataset/scan balancing, the weighted sampling pool, foreground-aware patch
//! selection and leakage-safe train/test splitting.

mod patch;
mod plan;
mod split;

use serde::{Deserialize, Serialize};

pub use patch::{choose_patch, ForegroundMap, PatchChoice, DEFAULT_CELL};
pub use plan::{
    build_plan, dataset_weights, repeat_factor, PlanEntry, SamplePlan, ScanSampler, DEFAULT_PATCH_VOXELS,
    DEFAULT_PROMPT_CAP,
};
pub use split::{split_scans, Split, SplitAssignment};

/// Per-scan statistics driving sampling and splitting.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScanRecord {
    pub scan_id: String,
    pub dataset_id: String,
    pub patient_id: String,
    /// Annotated (foreground) voxel count.
    pub s_roi: u64,
    /// Number of annotated classes.
    pub classes: u32,
    /// Scans sharing underlying images across datasets carry the same group.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scan_group: Option<String>,
}
