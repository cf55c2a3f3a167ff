//! Manifest-driven orchestration: harmonize, split, sample-plan, eval and
//! report over a harmonized store, plus a synthetic phantom corpus.

mod config;
mod harmonize;
mod manifest;
mod phantom;
mod stages;
mod store;

use serde::{Deserialize, Serialize};

pub use config::RunConfig;
pub use harmonize::{harmonize, HarmonizeSummary, RunInfo};
pub use manifest::{DatasetManifest, ScanEntry};
pub use phantom::{synth_phantom, Ball, Cuboid, PhantomClass, PhantomGrid, PhantomOutput, PhantomScene, PhantomSpec};
pub use stages::{
    load_scan_records, run_eval, run_report, run_sample_plan, run_split, EvalOptions, EvalScope, EvalSummary, Prediction,
};
pub use store::{read_mask, Sidecar, Store};

/// A scan that could not be processed by a stage.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Failure {
    pub dataset_id: String,
    pub scan_id: String,
    pub stage: String,
    pub error: String,
}

impl Failure {
    pub fn new(dataset_id: &str, scan_id: &str, stage: &str, error: &crate::Error) -> Self {
        Failure {
            dataset_id: dataset_id.to_string(),
            scan_id: scan_id.to_string(),
            stage: stage.to_string(),
            error: error.to_string(),
        }
    }
}
