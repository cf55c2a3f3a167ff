use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::labels::{ClassMap, Region};
use crate::volume::Modality;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScanEntry {
    pub scan_id: String,
    pub patient_id: String,
    /// Image path, relative to the manifest's directory unless absolute.
    pub image: PathBuf,
    pub labels: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scan_group: Option<String>,
}

/// One source dataset: its scans, modality and class map.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub schema_version: u32,
    pub dataset_id: String,
    pub modality: Modality,
    pub class_map: PathBuf,
    /// Region given to this dataset's classes that the catalog leaves without one.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub default_region: Option<Region>,
    pub scans: Vec<ScanEntry>,
    #[serde(skip)]
    pub base_dir: PathBuf,
}

impl DatasetManifest {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let mut m: DatasetManifest = crate::labels::read_json(path)?;
        m.base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        m.validate()?;
        Ok(m)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        crate::labels::write_json(path.as_ref(), self)
    }

    pub fn validate(&self) -> Result<()> {
        let ok_id = |s: &str| !s.is_empty() && s.chars().all(|c| c.is_ascii_alphanumeric() || "_-.".contains(c)) && s != "." && s != "..";
        if !ok_id(&self.dataset_id) {
            return Err(Error::InvalidConfig(format!("dataset id {:?} is not a plain file name", self.dataset_id)));
        }
        let mut seen = BTreeSet::new();
        for s in &self.scans {
            if !ok_id(&s.scan_id) {
                return Err(Error::InvalidConfig(format!("scan id {:?} is not a plain file name", s.scan_id)));
            }
            if !seen.insert(&s.scan_id) {
                return Err(Error::InvalidConfig(format!("scan id {:?} repeats in {}", s.scan_id, self.dataset_id)));
            }
        }
        Ok(())
    }

    pub fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }

    pub fn load_class_map(&self) -> Result<ClassMap> {
        let m = ClassMap::load(self.resolve(&self.class_map))?;
        if m.dataset_id != self.dataset_id {
            return Err(Error::InvalidConfig(format!(
                "class map belongs to {:?}, manifest is {:?}",
                m.dataset_id, self.dataset_id
            )));
        }
        Ok(m)
    }
}
