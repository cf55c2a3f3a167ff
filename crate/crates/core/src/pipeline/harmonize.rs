use std::collections::BTreeSet;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{DatasetManifest, Failure, RunConfig, ScanEntry, Sidecar, Store};
use crate::error::{Error, Result};
use crate::labels::{apply_merges, map_labels, validate_catalog, Catalog, ClassMap, MergeRules};
use crate::sampler::ScanRecord;
use crate::volume::{crop_nonzero, load_nifti, normalize, Reorient, Resample};

/// Written to `run.json` next to the harmonized data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunInfo {
    pub schema_version: u32,
    pub config_hash: String,
    pub config: RunConfig,
    pub datasets: Vec<String>,
    pub scans: usize,
    pub failures: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HarmonizeSummary {
    pub records: Vec<ScanRecord>,
    pub failures: Vec<Failure>,
}

pub(crate) fn pool(jobs: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| Error::InvalidConfig(format!("worker pool: {e}")))
}

/// Fills regions of class-map terms the catalog leaves unassigned from the
/// manifest's default, then checks the whole label system.
fn effective_catalog(
    mut catalog: Catalog,
    sets: &[(&DatasetManifest, ClassMap)],
    rules: &MergeRules,
) -> Result<Catalog> {
    for (m, cm) in sets {
        let Some(region) = m.default_region else { continue };
        for term in cm.entries.values() {
            if let Some(t) = catalog.terms.iter_mut().find(|t| &t.id == term) {
                if t.region.is_none() && !t.lesion {
                    t.region = Some(region);
                }
            }
        }
    }
    let maps: Vec<ClassMap> = sets.iter().map(|(_, c)| c.clone()).collect();
    let report = validate_catalog(&catalog, &maps, rules);
    if !report.is_empty() {
        let text = serde_json::to_string(&report.findings).unwrap_or_default();
        return Err(Error::InvalidConfig(format!("label system is not admissible: {text}")));
    }
    Ok(catalog)
}

struct Job<'a> {
    manifest: &'a DatasetManifest,
    class_map: &'a ClassMap,
    scan: &'a ScanEntry,
}

/// Reorients, resamples, crops and normalizes every scan, maps its labels
/// onto the catalog and applies merge rules. Per-scan errors are collected
/// in the summary; configuration problems abort before any scan is touched.
pub fn harmonize(manifests: &[DatasetManifest], config: &RunConfig, out: &Path, jobs: usize) -> Result<HarmonizeSummary> {
    config.validate()?;
    let mut ids = BTreeSet::new();
    let mut scans = BTreeSet::new();
    for m in manifests {
        m.validate()?;
        if !ids.insert(m.dataset_id.as_str()) {
            return Err(Error::InvalidConfig(format!("dataset id {:?} appears twice", m.dataset_id)));
        }
        for s in &m.scans {
            if !scans.insert(s.scan_id.as_str()) {
                return Err(Error::InvalidConfig(format!("scan id {:?} is used by more than one dataset", s.scan_id)));
            }
        }
    }
    let sets = manifests
        .iter()
        .map(|m| Ok((m, m.load_class_map()?)))
        .collect::<Result<Vec<_>>>()?;
    let rules = config.load_merge_rules()?;
    let catalog = effective_catalog(config.load_catalog()?, &sets, &rules)?;
    let hash = config.hash();

    let store = Store::new(out);
    std::fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    catalog.save(store.catalog_path())?;
    rules.save(store.merge_rules_path())?;

    let jobs_list: Vec<Job> = sets
        .iter()
        .flat_map(|(m, cm)| m.scans.iter().map(move |s| Job { manifest: m, class_map: cm, scan: s }))
        .collect();
    let results: Vec<(Job, Result<ScanRecord>)> = pool(jobs)?.install(|| {
        jobs_list
            .into_par_iter()
            .map(|j| {
                let r = harmonize_scan(&j, &catalog, &rules, config, &hash, &store);
                (j, r)
            })
            .collect()
    });

    let mut records = Vec::new();
    let mut failures = Vec::new();
    for (j, r) in results {
        match r {
            Ok(rec) => records.push(rec),
            Err(e) => {
                log::warn!("{}/{}: {e}", j.manifest.dataset_id, j.scan.scan_id);
                failures.push(Failure::new(&j.manifest.dataset_id, &j.scan.scan_id, "harmonize", &e));
            }
        }
    }
    records.sort_by(|a, b| (&a.dataset_id, &a.scan_id).cmp(&(&b.dataset_id, &b.scan_id)));
    failures.sort();
    crate::knowledge::write_jsonl(store.scans_path(), &records)?;
    crate::labels::write_json(&store.failures_path(), &failures)?;
    let info = RunInfo {
        schema_version: crate::SCHEMA_VERSION,
        config_hash: hash,
        config: config.clone(),
        datasets: ids.iter().map(|s| s.to_string()).collect(),
        scans: records.len(),
        failures: failures.len(),
    };
    crate::labels::write_json(&store.run_path(), &info)?;
    Ok(HarmonizeSummary { records, failures })
}

fn harmonize_scan(j: &Job, catalog: &Catalog, rules: &MergeRules, config: &RunConfig, hash: &str, store: &Store) -> Result<ScanRecord> {
    let (m, s) = (j.manifest, j.scan);
    let (image, labels) = load_nifti(m.resolve(&s.image), Some(&m.resolve(&s.labels)), m.modality)?;
    let labels = labels.expect("labels were requested");
    let original_axcodes = image.axcodes()?.to_string();
    let (original_shape, original_spacing) = (image.shape(), image.spacing());

    let image = image.reorient(config.target_axcodes)?.resample(config.target_spacing)?;
    let labels = labels.reorient(config.target_axcodes)?.resample(config.target_spacing)?;
    let resampled_shape = image.shape();
    let (image, labels, crop_offset) = crop_nonzero(&image, &labels)?;
    let image = normalize(&image);
    let masks = apply_merges(map_labels(&labels, j.class_map, catalog)?, &rules.rules)?;

    image.save(store.image_path(&m.dataset_id, &s.scan_id))?;
    store.write_masks(&m.dataset_id, &s.scan_id, &masks, &image.affine)?;
    let sidecar = Sidecar {
        schema_version: crate::SCHEMA_VERSION,
        dataset_id: m.dataset_id.clone(),
        scan_id: s.scan_id.clone(),
        patient_id: s.patient_id.clone(),
        scan_group: s.scan_group.clone(),
        source_image: s.image.clone(),
        source_labels: s.labels.clone(),
        original_shape,
        original_spacing,
        original_axcodes,
        resampled_shape,
        crop_offset,
        shape: image.shape(),
        spacing: image.spacing(),
        affine: image.affine,
        terms: masks.keys().cloned().collect(),
        config_hash: hash.to_string(),
    };
    crate::labels::write_json(&store.sidecar_path(&m.dataset_id, &s.scan_id), &sidecar)?;

    let s_roi = labels.foreground_count() as u64;
    let classes = masks.values().filter(|m| !m.is_empty()).count() as u32;
    Ok(ScanRecord {
        scan_id: s.scan_id.clone(),
        dataset_id: m.dataset_id.clone(),
        patient_id: s.patient_id.clone(),
        s_roi,
        classes,
        scan_group: s.scan_group.clone(),
    })
}
