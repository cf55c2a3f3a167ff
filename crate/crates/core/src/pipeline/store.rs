use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::Affine;
use crate::labels::MaskSet;
use crate::mask::BinaryMask;
use crate::volume::{read_nifti, save_nifti, NiftiDtype};

/// Layout of a harmonized store:
///
/// ```text
/// <root>/run.json, catalog.json, merge_rules.json, scans.jsonl, failures.json
/// <root>/split.json, sample_plan.json
/// <root>/<dataset>/img/<scan>.nii.gz
/// <root>/<dataset>/lbl/<scan>/<term>.nii.gz
/// <root>/<dataset>/sidecar/<scan>.json
/// ```
///
/// A prediction directory uses the same `<dataset>/lbl/<scan>/<term>` layout.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Store {
    root: PathBuf,
}

impl Store {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        Store { root: root.into() }
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn image_path(&self, dataset: &str, scan: &str) -> PathBuf {
        self.root.join(dataset).join("img").join(format!("{scan}.nii.gz"))
    }

    pub fn mask_dir(&self, dataset: &str, scan: &str) -> PathBuf {
        self.root.join(dataset).join("lbl").join(scan)
    }

    pub fn mask_path(&self, dataset: &str, scan: &str, term: &str) -> PathBuf {
        self.mask_dir(dataset, scan).join(format!("{term}.nii.gz"))
    }

    pub fn sidecar_path(&self, dataset: &str, scan: &str) -> PathBuf {
        self.root.join(dataset).join("sidecar").join(format!("{scan}.json"))
    }

    pub fn run_path(&self) -> PathBuf {
        self.root.join("run.json")
    }

    pub fn catalog_path(&self) -> PathBuf {
        self.root.join("catalog.json")
    }

    pub fn merge_rules_path(&self) -> PathBuf {
        self.root.join("merge_rules.json")
    }

    pub fn scans_path(&self) -> PathBuf {
        self.root.join("scans.jsonl")
    }

    pub fn failures_path(&self) -> PathBuf {
        self.root.join("failures.json")
    }

    pub fn split_path(&self) -> PathBuf {
        self.root.join("split.json")
    }

    pub fn plan_path(&self) -> PathBuf {
        self.root.join("sample_plan.json")
    }

    /// Fails with the command that produces `path` when it does not exist.
    pub fn require(&self, path: PathBuf, hint: &str) -> Result<PathBuf> {
        if path.exists() {
            Ok(path)
        } else {
            Err(Error::MissingArtifact {
                path,
                hint: hint.to_string(),
            })
        }
    }

    /// Replaces the scan's mask directory with one file per term.
    pub fn write_masks(&self, dataset: &str, scan: &str, masks: &MaskSet, affine: &Affine) -> Result<()> {
        let dir = self.mask_dir(dataset, scan);
        if dir.exists() {
            fs::remove_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
        }
        fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
        for (term, m) in masks {
            let data = m.data.mapv(|b| if b { 1.0 } else { 0.0 });
            save_nifti(self.mask_path(dataset, scan, term), data.view(), affine, NiftiDtype::U8)?;
        }
        Ok(())
    }

    /// Reads every mask of a scan; an absent directory yields an empty set.
    pub fn read_masks(&self, dataset: &str, scan: &str) -> Result<MaskSet> {
        let dir = self.mask_dir(dataset, scan);
        let mut out = MaskSet::new();
        if !dir.exists() {
            return Ok(out);
        }
        let entries = fs::read_dir(&dir).map_err(|e| Error::io(&dir, e))?;
        for e in entries {
            let path = e.map_err(|e| Error::io(&dir, e))?.path();
            let Some(term) = path.file_name().and_then(|n| n.to_str()).and_then(|n| n.strip_suffix(".nii.gz")) else {
                continue;
            };
            out.insert(term.to_string(), read_mask(&path)?);
        }
        Ok(out)
    }
}

pub fn read_mask(path: &Path) -> Result<BinaryMask> {
    let img = read_nifti(path)?;
    BinaryMask::new(img.data.mapv(|v| v > 0.5), img.affine.spacing())
}

/// Provenance of one harmonized scan.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sidecar {
    pub schema_version: u32,
    pub dataset_id: String,
    pub scan_id: String,
    pub patient_id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scan_group: Option<String>,
    pub source_image: PathBuf,
    pub source_labels: PathBuf,
    pub original_shape: [usize; 3],
    pub original_spacing: [f64; 3],
    pub original_axcodes: String,
    pub resampled_shape: [usize; 3],
    /// Voxel offset of the crop within the resampled grid.
    pub crop_offset: [usize; 3],
    pub shape: [usize; 3],
    pub spacing: [f64; 3],
    pub affine: Affine,
    pub terms: Vec<String>,
    pub config_hash: String,
}
