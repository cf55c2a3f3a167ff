use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{merge_order, Catalog, ClassMap, MergeRules, Region};
use crate::volume::Modality;

/// One admissibility problem found in a label system.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Finding {
    DuplicateTerm { name: String, modality: Modality },
    DuplicateId { id: String },
    MissingRegion { id: String },
    LesionInAnatomicalRegion { id: String, region: Region },
    DanglingMergeReference { parent: String, missing: String },
    EmptyMergeRule { parent: String },
    MergeCycle { through: String },
    DanglingClassMapReference { dataset: String, code: u16, term: String },
    UndeclaredSynonym { dataset: String, term: String, codes: Vec<u16> },
    BackgroundCodeMapped { dataset: String },
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ValidationReport {
    pub findings: Vec<Finding>,
}

impl ValidationReport {
    pub fn is_empty(&self) -> bool {
        self.findings.is_empty()
    }
}

/// Checks a catalog together with the class maps and merge rules that use it.
/// An empty report means the label system is admissible.
pub fn validate_catalog(catalog: &Catalog, maps: &[ClassMap], rules: &MergeRules) -> ValidationReport {
    let mut findings = Vec::new();

    let mut by_name: BTreeMap<(String, Modality), usize> = BTreeMap::new();
    let mut by_id: BTreeMap<&str, usize> = BTreeMap::new();
    for t in &catalog.terms {
        *by_name
            .entry((t.name.to_lowercase(), t.modality))
            .or_default() += 1;
        *by_id.entry(t.id.as_str()).or_default() += 1;
        match t.region {
            None if !t.lesion => findings.push(Finding::MissingRegion { id: t.id.clone() }),
            Some(r) if t.lesion && r != Region::Lesion => {
                findings.push(Finding::LesionInAnatomicalRegion {
                    id: t.id.clone(),
                    region: r,
                })
            }
            _ => {}
        }
    }
    for ((name, modality), n) in by_name {
        if n > 1 {
            findings.push(Finding::DuplicateTerm { name, modality });
        }
    }
    for (id, n) in by_id {
        if n > 1 {
            findings.push(Finding::DuplicateId { id: id.to_string() });
        }
    }

    for r in &rules.rules {
        if r.children.is_empty() {
            findings.push(Finding::EmptyMergeRule {
                parent: r.parent.clone(),
            });
        }
        for id in std::iter::once(&r.parent).chain(&r.children) {
            if !catalog.contains(id) {
                findings.push(Finding::DanglingMergeReference {
                    parent: r.parent.clone(),
                    missing: id.clone(),
                });
            }
        }
    }
    if let Err(crate::Error::CycleDetected(through)) = merge_order(&rules.rules) {
        findings.push(Finding::MergeCycle { through });
    }

    for m in maps {
        if m.entries.contains_key(&0) {
            findings.push(Finding::BackgroundCodeMapped {
                dataset: m.dataset_id.clone(),
            });
        }
        let mut codes_of: BTreeMap<&str, Vec<u16>> = BTreeMap::new();
        for (code, term) in &m.entries {
            if !catalog.contains(term) {
                findings.push(Finding::DanglingClassMapReference {
                    dataset: m.dataset_id.clone(),
                    code: *code,
                    term: term.clone(),
                });
            }
            codes_of.entry(term.as_str()).or_default().push(*code);
        }
        for (term, codes) in codes_of {
            if codes.len() > 1 && !m.synonyms.contains(term) {
                findings.push(Finding::UndeclaredSynonym {
                    dataset: m.dataset_id.clone(),
                    term: term.to_string(),
                    codes,
                });
            }
        }
    }

    ValidationReport { findings }
}
