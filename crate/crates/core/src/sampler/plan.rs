use std::collections::BTreeMap;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::ScanRecord;
use crate::error::{Error, Result};

pub const DEFAULT_PATCH_VOXELS: u64 = 288 * 288 * 96;
pub const DEFAULT_PROMPT_CAP: u32 = 32;

/// Dataset weights proportional to `1/sqrt(N)`, normalized to sum to 1.
pub fn dataset_weights(case_counts: &BTreeMap<String, usize>) -> Result<BTreeMap<String, f64>> {
    if let Some((d, _)) = case_counts.iter().find(|(_, n)| **n == 0) {
        return Err(Error::EmptyDataset(d.clone()));
    }
    let raw: BTreeMap<String, f64> = case_counts
        .iter()
        .map(|(d, n)| (d.clone(), 1.0 / (*n as f64).sqrt()))
        .collect();
    let total: f64 = raw.values().sum();
    Ok(raw.into_iter().map(|(d, w)| (d, w / total)).collect())
}

/// Pool multiplicity `max(1, round_half_up(S_roi/patch_voxels * M/prompt_cap))`.
pub fn repeat_factor(rec: &ScanRecord, patch_voxels: u64, prompt_cap: u32) -> u32 {
    assert!(patch_voxels > 0 && prompt_cap > 0);
    // Exact rational arithmetic: R = (S*M) / (P*C).
    let num = rec.s_roi as u128 * rec.classes as u128;
    let den = patch_voxels as u128 * prompt_cap as u128;
    let rounded = (2 * num + den) / (2 * den);
    rounded.clamp(1, u32::MAX as u128) as u32
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanEntry {
    pub scan_id: String,
    pub dataset_id: String,
    /// Base draw weight: dataset weight divided by the dataset's case count.
    pub weight: f64,
    pub repeats: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SamplePlan {
    pub schema_version: u32,
    pub seed: u64,
    pub entries: Vec<PlanEntry>,
}

impl SamplePlan {
    pub fn validate(&self) -> Result<()> {
        if self.entries.is_empty() {
            return Err(Error::InvalidInput("sample plan has no entries".into()));
        }
        if self.entries.iter().any(|e| !(e.weight >= 0.0) || e.repeats == 0) {
            return Err(Error::InvalidInput("plan weights must be >= 0 and repeats >= 1".into()));
        }
        if self.entries.iter().map(|e| e.weight).sum::<f64>() <= 0.0 {
            return Err(Error::InvalidInput("plan weights sum to zero".into()));
        }
        Ok(())
    }

    /// Draw probability of every entry, in entry order.
    pub fn probabilities(&self) -> Vec<f64> {
        let mass: Vec<f64> = self
            .entries
            .iter()
            .map(|e| e.weight * e.repeats as f64)
            .collect();
        let total: f64 = mass.iter().sum();
        mass.into_iter().map(|m| m / total).collect()
    }
}

/// Builds the sampling pool over `records` (normally the training split).
pub fn build_plan(records: &[ScanRecord], seed: u64, patch_voxels: u64, prompt_cap: u32) -> Result<SamplePlan> {
    let mut counts: BTreeMap<String, usize> = BTreeMap::new();
    for r in records {
        *counts.entry(r.dataset_id.clone()).or_default() += 1;
    }
    let weights = dataset_weights(&counts)?;
    let mut entries: Vec<PlanEntry> = records
        .iter()
        .map(|r| PlanEntry {
            scan_id: r.scan_id.clone(),
            dataset_id: r.dataset_id.clone(),
            weight: weights[&r.dataset_id] / counts[&r.dataset_id] as f64,
            repeats: repeat_factor(r, patch_voxels, prompt_cap),
        })
        .collect();
    entries.sort_by(|a, b| (&a.dataset_id, &a.scan_id).cmp(&(&b.dataset_id, &b.scan_id)));
    let plan = SamplePlan {
        schema_version: crate::SCHEMA_VERSION,
        seed,
        entries,
    };
    plan.validate()?;
    Ok(plan)
}

/// Single-consumer draw stream over a plan: scan `s` is drawn with
/// probability proportional to `weight(s) * repeats(s)`.
pub struct ScanSampler<'a> {
    plan: &'a SamplePlan,
    index: WeightedIndex<f64>,
    rng: ChaCha8Rng,
}

impl<'a> ScanSampler<'a> {
    pub fn new(plan: &'a SamplePlan) -> Result<Self> {
        plan.validate()?;
        let index = WeightedIndex::new(plan.entries.iter().map(|e| e.weight * e.repeats as f64))
            .map_err(|e| Error::InvalidInput(e.to_string()))?;
        Ok(ScanSampler {
            plan,
            index,
            rng: ChaCha8Rng::seed_from_u64(plan.seed),
        })
    }

    pub fn draw_index(&mut self) -> usize {
        self.index.sample(&mut self.rng)
    }

    pub fn draw_scan(&mut self) -> &'a str {
        let i = self.draw_index();
        &self.plan.entries[i].scan_id
    }
}
