use std::path::Path;

use rayon::prelude::*;
use sha2::{Digest, Sha256};

use super::harmonize::pool;
use super::{Failure, RunConfig, Store};
use crate::error::{Error, Result};
use crate::knowledge::{read_jsonl, write_jsonl};
use crate::labels::Catalog;
use crate::mask::BinaryMask;
use crate::metrics::{aggregate, box_as_prediction, dsc, loose_box, nsd_with, tight_box, AggregationReport, MetricsRecord, Tolerance, AXIAL, LOOSE_SHIFT_FRAC};
use crate::sampler::{build_plan, split_scans, SamplePlan, ScanRecord, Split, SplitAssignment};

fn harmonize_hint(store: &Store) -> String {
    format!("segkit harmonize --out {} <manifest.json>...", store.root().display())
}

fn split_hint(store: &Store) -> String {
    format!("segkit split --store {}", store.root().display())
}

pub fn load_scan_records(store: &Store) -> Result<Vec<ScanRecord>> {
    read_jsonl(store.require(store.scans_path(), &harmonize_hint(store))?)
}

/// Patient-level train/test split of the harmonized scans, saved as `split.json`.
pub fn run_split(store: &Store, config: &RunConfig) -> Result<SplitAssignment> {
    let records = load_scan_records(store)?;
    let split = split_scans(&records, config.train_ratio, config.seed)?;
    split.save(store.split_path())?;
    Ok(split)
}

/// Sampling pool over the training scans, saved as `sample_plan.json`.
pub fn run_sample_plan(store: &Store, config: &RunConfig) -> Result<SamplePlan> {
    let records = load_scan_records(store)?;
    let split = SplitAssignment::load(store.require(store.split_path(), &split_hint(store))?)?;
    let train: Vec<ScanRecord> = records
        .into_iter()
        .filter(|r| split.get(&r.scan_id) == Some(Split::Train))
        .collect();
    let plan = build_plan(&train, config.seed, config.patch_voxels(), config.prompt_cap)?;
    crate::labels::write_json(&store.plan_path(), &plan)?;
    Ok(plan)
}

/// Source of predicted masks for evaluation.
#[derive(Debug, Clone, PartialEq)]
pub enum Prediction {
    /// Masks on disk in the store's `<dataset>/lbl/<scan>/<term>.nii.gz` layout.
    Dir(std::path::PathBuf),
    /// Per-slice tight boxes around the ground truth.
    TightBox,
    /// Tight boxes with every corner randomly shifted.
    LooseBox,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EvalScope {
    All,
    Test,
    Train,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalOptions {
    pub prediction: Prediction,
    pub scope: EvalScope,
    pub tolerance: Tolerance,
    pub seed: u64,
}

impl EvalOptions {
    pub fn new(prediction: Prediction, config: &RunConfig) -> Self {
        EvalOptions {
            prediction,
            scope: EvalScope::Test,
            tolerance: config.tolerance(),
            seed: config.seed,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalSummary {
    pub records: Vec<MetricsRecord>,
    pub failures: Vec<Failure>,
}

fn box_seed(seed: u64, dataset: &str, scan: &str, term: &str) -> u64 {
    let mut h = Sha256::new();
    h.update(seed.to_le_bytes());
    for part in [dataset, scan, term] {
        h.update(part.as_bytes());
        h.update([0]);
    }
    u64::from_le_bytes(h.finalize()[..8].try_into().unwrap())
}

fn predict(opts: &EvalOptions, dataset: &str, scan: &str, term: &str, gt: &BinaryMask) -> Result<BinaryMask> {
    let shape = gt.shape();
    match &opts.prediction {
        Prediction::Dir(dir) => {
            let path = Store::new(dir).mask_path(dataset, scan, term);
            if path.exists() {
                super::store::read_mask(&path)
            } else {
                log::warn!("no prediction for {dataset}/{scan}/{term}; scoring an empty mask");
                Ok(BinaryMask::empty(shape, gt.spacing))
            }
        }
        Prediction::TightBox => box_as_prediction(&tight_box(gt, AXIAL)?, shape, gt.spacing, AXIAL),
        Prediction::LooseBox => {
            let rects = loose_box(&tight_box(gt, AXIAL)?, shape, AXIAL, LOOSE_SHIFT_FRAC, box_seed(opts.seed, dataset, scan, term))?;
            box_as_prediction(&rects, shape, gt.spacing, AXIAL)
        }
    }
}

fn eval_scan(store: &Store, opts: &EvalOptions, rec: &ScanRecord) -> Result<Vec<MetricsRecord>> {
    let gt = store.read_masks(&rec.dataset_id, &rec.scan_id)?;
    let mut out = Vec::new();
    for (term, g) in &gt {
        let p = predict(opts, &rec.dataset_id, &rec.scan_id, term, g)?;
        out.push(MetricsRecord {
            term_id: term.clone(),
            dataset_id: rec.dataset_id.clone(),
            scan_id: rec.scan_id.clone(),
            dsc: dsc(&p, g)?,
            nsd: nsd_with(&p, g, opts.tolerance)?,
        });
    }
    Ok(out)
}

/// Scores predictions against the stored ground truth and writes
/// `records.jsonl` and `failures.json` to `out`.
pub fn run_eval(store: &Store, opts: &EvalOptions, out: &Path, jobs: usize) -> Result<EvalSummary> {
    let records = load_scan_records(store)?;
    let selected: Vec<ScanRecord> = match opts.scope {
        EvalScope::All => records,
        scope => {
            let want = if scope == EvalScope::Test { Split::Test } else { Split::Train };
            let split = SplitAssignment::load(store.require(store.split_path(), &split_hint(store))?)?;
            records.into_iter().filter(|r| split.get(&r.scan_id) == Some(want)).collect()
        }
    };
    if let Prediction::Dir(d) = &opts.prediction {
        if !d.is_dir() {
            return Err(Error::InvalidConfig(format!("prediction directory {} does not exist", d.display())));
        }
    }
    let results: Vec<(&ScanRecord, Result<Vec<MetricsRecord>>)> =
        pool(jobs)?.install(|| selected.par_iter().map(|r| (r, eval_scan(store, opts, r))).collect());
    let mut metrics = Vec::new();
    let mut failures = Vec::new();
    for (r, res) in results {
        match res {
            Ok(m) => metrics.extend(m),
            Err(e) => {
                log::warn!("{}/{}: {e}", r.dataset_id, r.scan_id);
                failures.push(Failure::new(&r.dataset_id, &r.scan_id, "eval", &e));
            }
        }
    }
    std::fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    write_jsonl(out.join("records.jsonl"), &metrics)?;
    crate::labels::write_json(&out.join("failures.json"), &failures)?;
    Ok(EvalSummary { records: metrics, failures })
}

/// Aggregates `records.jsonl` into report tables under `out`.
pub fn run_report(records: &Path, catalog: &Catalog, out: &Path) -> Result<AggregationReport> {
    if !records.exists() {
        return Err(Error::MissingArtifact {
            path: records.to_path_buf(),
            hint: "segkit eval --store <store> --out <dir>".into(),
        });
    }
    let recs: Vec<MetricsRecord> = read_jsonl(records)?;
    let report = aggregate(&recs, catalog)?;
    report.write(out)?;
    Ok(report)
}
