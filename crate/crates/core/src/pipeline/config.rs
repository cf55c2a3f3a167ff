use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::geometry::Axcodes;
use crate::labels::{Catalog, MergeRules};
use crate::metrics::Tolerance;
use crate::volume::PatchSpec;

/// Run-wide settings. Every field has a default and can be overridden from
/// a JSON file; the hash of the effective config is written to outputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub schema_version: u32,
    pub target_axcodes: Axcodes,
    pub target_spacing: [f64; 3],
    pub patch_extent: [usize; 3],
    pub seed: u64,
    /// NSD tolerance in millimetres.
    pub tau_mm: f64,
    /// NSD tolerance in voxel steps; takes precedence over `tau_mm` when set.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tau_voxels: Option<f64>,
    pub oversample_prob: f64,
    pub train_ratio: f64,
    pub prompt_cap: u32,
    /// Catalog JSON; the built-in catalog when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub catalog: Option<PathBuf>,
    /// Merge rules JSON; no merges when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub merge_rules: Option<PathBuf>,
    /// Directory that relative `catalog`/`merge_rules` paths are resolved against.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            schema_version: crate::SCHEMA_VERSION,
            target_axcodes: Axcodes::RAS,
            target_spacing: [1.0, 1.0, 3.0],
            patch_extent: PatchSpec::DEFAULT_EXTENT,
            seed: 0,
            tau_mm: 1.0,
            tau_voxels: None,
            oversample_prob: 0.5,
            train_ratio: 0.8,
            prompt_cap: crate::sampler::DEFAULT_PROMPT_CAP,
            catalog: None,
            merge_rules: None,
            base_dir: PathBuf::new(),
        }
    }
}

impl RunConfig {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg: RunConfig = serde_json::from_str(&text)
            .map_err(|e| Error::InvalidConfig(format!("{}: {e}", path.display())))?;
        cfg.base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidConfig(m));
        if self.target_spacing.iter().any(|s| !(*s > 0.0 && s.is_finite())) {
            return bad(format!("target spacing {:?} must be positive", self.target_spacing));
        }
        if self.patch_extent.contains(&0) {
            return bad(format!("patch extent {:?} must be positive", self.patch_extent));
        }
        if !(self.tau_mm >= 0.0 && self.tau_mm.is_finite()) {
            return bad(format!("tau_mm {} must be non-negative", self.tau_mm));
        }
        if let Some(t) = self.tau_voxels {
            if !(t >= 0.0 && t.is_finite()) {
                return bad(format!("tau_voxels {t} must be non-negative"));
            }
        }
        if !(0.0..=1.0).contains(&self.oversample_prob) {
            return bad(format!("oversample_prob {} outside [0, 1]", self.oversample_prob));
        }
        if !(self.train_ratio > 0.0 && self.train_ratio < 1.0) {
            return bad(format!("train_ratio {} outside (0, 1)", self.train_ratio));
        }
        if self.prompt_cap == 0 {
            return bad("prompt_cap must be positive".into());
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

    pub fn load_catalog(&self) -> Result<Catalog> {
        match &self.catalog {
            Some(p) => Catalog::load(self.resolve(p)),
            None => Ok(Catalog::default_catalog()),
        }
    }

    pub fn load_merge_rules(&self) -> Result<MergeRules> {
        match &self.merge_rules {
            Some(p) => MergeRules::load(self.resolve(p)),
            None => Ok(MergeRules::default()),
        }
    }

    pub fn tolerance(&self) -> Tolerance {
        match self.tau_voxels {
            Some(t) => Tolerance::Voxels(t),
            None => Tolerance::Mm(self.tau_mm),
        }
    }

    pub fn patch_voxels(&self) -> u64 {
        self.patch_extent.iter().map(|e| *e as u64).product()
    }

    /// Hex SHA-256 of the canonical JSON form.
    pub fn hash(&self) -> String {
        let bytes = serde_json::to_vec(self).expect("config serializes");
        hex::encode(Sha256::digest(&bytes))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_and_partial_override() {
        let c: RunConfig = serde_json::from_str(r#"{"seed": 9, "target_spacing": [1.5, 1.5, 1.5]}"#).unwrap();
        assert_eq!(c.seed, 9);
        assert_eq!(c.patch_extent, [288, 288, 96]);
        assert_eq!(c.target_axcodes, Axcodes::RAS);
        assert_ne!(c.hash(), RunConfig::default().hash());
        assert_eq!(RunConfig::default().hash(), RunConfig::default().hash());
        assert!(serde_json::from_str::<RunConfig>(r#"{"sed": 1}"#).is_err());
    }

    #[test]
    fn tau_voxels_wins() {
        let c = RunConfig {
            tau_voxels: Some(2.0),
            ..Default::default()
        };
        assert_eq!(c.tolerance(), Tolerance::Voxels(2.0));
        assert_eq!(RunConfig::default().tolerance(), Tolerance::Mm(1.0));
        assert!(RunConfig {
            train_ratio: 1.0,
            ..Default::default()
        }
        .validate()
        .is_err());
    }
}
