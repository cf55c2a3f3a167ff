//! Unified terminology catalog shared by all datasets, per-dataset class
//! maps, and merge rules that derive coarse classes from fine ones.

mod default_catalog;
mod merge;
mod validate;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::volume::Modality;

pub use default_catalog::{infer_region, is_lesion_name, DEFAULT_CLASS_NAMES};
pub use merge::{apply_merges, map_labels, merge_order, MaskSet};
pub use validate::{validate_catalog, Finding, ValidationReport};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Region {
    Brain,
    HeadNeck,
    UpperLimb,
    Thorax,
    Spine,
    Abdomen,
    LowerLimb,
    Pelvis,
    WholeBody,
    Lesion,
}

impl Region {
    pub const ALL: [Region; 10] = [
        Region::Brain,
        Region::HeadNeck,
        Region::UpperLimb,
        Region::Thorax,
        Region::Spine,
        Region::Abdomen,
        Region::LowerLimb,
        Region::Pelvis,
        Region::WholeBody,
        Region::Lesion,
    ];

    /// Column header used in report tables.
    pub fn short(self) -> &'static str {
        match self {
            Region::Brain => "Brain",
            Region::HeadNeck => "H&N",
            Region::UpperLimb => "UL",
            Region::Thorax => "Thorax",
            Region::Spine => "Spine",
            Region::Abdomen => "Abdomen",
            Region::LowerLimb => "LL",
            Region::Pelvis => "Pelvis",
            Region::WholeBody => "WB",
            Region::Lesion => "Lesion",
        }
    }
}

impl fmt::Display for Region {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self:?}")
    }
}

impl FromStr for Region {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Region::ALL
            .into_iter()
            .find(|r| r.to_string().eq_ignore_ascii_case(s) || r.short().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::InvalidInput(format!("unknown region {s:?}")))
    }
}

/// One class of the unified label system, qualified by modality.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Terminology {
    pub id: String,
    pub name: String,
    pub modality: Modality,
    #[serde(default)]
    pub region: Option<Region>,
    #[serde(default)]
    pub lesion: bool,
}

impl Terminology {
    /// Builds a term with the canonical id, inferring region and lesion flag
    /// from the name.
    pub fn new(name: &str, modality: Modality) -> Self {
        let lesion = is_lesion_name(name);
        Terminology {
            id: term_id(name, modality),
            name: name.to_string(),
            modality,
            region: infer_region(name),
            lesion,
        }
    }
}

/// Stable id: slugified name with the modality as suffix, e.g. `liver_ct`.
pub fn term_id(name: &str, modality: Modality) -> String {
    let mut slug = String::with_capacity(name.len() + 4);
    let mut pending_sep = false;
    for c in name.chars() {
        if c.is_ascii_alphanumeric() {
            if pending_sep && !slug.is_empty() {
                slug.push('_');
            }
            pending_sep = false;
            slug.push(c.to_ascii_lowercase());
        } else {
            pending_sep = true;
        }
    }
    format!("{slug}_{}", modality.tag())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Catalog {
    pub schema_version: u32,
    /// Release tag of the label system.
    pub version: String,
    pub terms: Vec<Terminology>,
    #[serde(skip)]
    index: BTreeMap<String, usize>,
}

impl Catalog {
    pub fn new(version: impl Into<String>, terms: Vec<Terminology>) -> Self {
        let mut c = Catalog {
            schema_version: crate::SCHEMA_VERSION,
            version: version.into(),
            terms,
            index: BTreeMap::new(),
        };
        c.reindex();
        c
    }

    fn reindex(&mut self) {
        self.index = self
            .terms
            .iter()
            .enumerate()
            .map(|(i, t)| (t.id.clone(), i))
            .collect();
    }

    /// The shipped label system: every class name of the unified corpus.
    pub fn default_catalog() -> Self {
        let terms = DEFAULT_CLASS_NAMES
            .lines()
            .filter(|l| !l.trim().is_empty())
            .map(|line| {
                let (tag, name) = line
                    .trim()
                    .split_once(' ')
                    .expect("class name lines are `(modality) name`");
                let modality: Modality = tag
                    .trim_matches(|c| c == '(' || c == ')')
                    .parse()
                    .expect("known modality tag");
                Terminology::new(name, modality)
            })
            .collect();
        Catalog::new("default-1", terms)
    }

    pub fn get(&self, id: &str) -> Option<&Terminology> {
        self.index.get(id).map(|i| &self.terms[*i])
    }

    pub fn contains(&self, id: &str) -> bool {
        self.index.contains_key(id)
    }

    pub fn region_of(&self, id: &str) -> Result<Region> {
        let t = self
            .get(id)
            .ok_or_else(|| Error::UnknownTerminology(id.to_string()))?;
        if t.lesion {
            return Ok(Region::Lesion);
        }
        t.region
            .ok_or_else(|| Error::InvalidInput(format!("terminology {id:?} has no region")))
    }

    pub fn push(&mut self, term: Terminology) {
        self.terms.push(term);
        self.reindex();
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let mut c: Catalog = read_json(path.as_ref())?;
        c.reindex();
        Ok(c)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        write_json(path.as_ref(), self)
    }
}

/// Dataset-local label codes to terminology ids.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassMap {
    pub schema_version: u32,
    pub dataset_id: String,
    pub entries: BTreeMap<u16, String>,
    /// Terms allowed to receive more than one code.
    #[serde(default)]
    pub synonyms: BTreeSet<String>,
}

impl ClassMap {
    pub fn new(dataset_id: impl Into<String>, entries: BTreeMap<u16, String>) -> Self {
        ClassMap {
            schema_version: crate::SCHEMA_VERSION,
            dataset_id: dataset_id.into(),
            entries,
            synonyms: BTreeSet::new(),
        }
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        read_json(path.as_ref())
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        write_json(path.as_ref(), self)
    }
}

/// `parent` is the voxel-wise union of `children`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MergeRule {
    pub parent: String,
    pub children: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct MergeRules {
    pub schema_version: u32,
    pub rules: Vec<MergeRule>,
}

impl MergeRules {
    pub fn new(rules: Vec<MergeRule>) -> Self {
        MergeRules {
            schema_version: crate::SCHEMA_VERSION,
            rules,
        }
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        read_json(path.as_ref())
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        write_json(path.as_ref(), self)
    }
}

pub(crate) fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::json(path.display().to_string(), e))
}

pub(crate) fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    let mut text =
        serde_json::to_string_pretty(value).map_err(|e| Error::json(path.display().to_string(), e))?;
    text.push('\n');
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}
