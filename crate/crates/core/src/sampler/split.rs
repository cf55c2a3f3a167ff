use std::collections::BTreeMap;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::ScanRecord;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Test,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitAssignment {
    pub schema_version: u32,
    pub seed: u64,
    pub ratio: f64,
    pub assignments: BTreeMap<String, Split>,
}

impl SplitAssignment {
    pub fn get(&self, scan_id: &str) -> Option<Split> {
        self.assignments.get(scan_id).copied()
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        crate::labels::read_json(path.as_ref())
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        crate::labels::write_json(path.as_ref(), self)
    }
}

struct UnionFind(Vec<usize>);

impl UnionFind {
    fn find(&mut self, mut x: usize) -> usize {
        while self.0[x] != x {
            self.0[x] = self.0[self.0[x]];
            x = self.0[x];
        }
        x
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            let (lo, hi) = (ra.min(rb), ra.max(rb));
            self.0[hi] = lo;
        }
    }
}

/// Splits scans into train/test at patient granularity per dataset.
///
/// Scans of one patient in one dataset, and scans sharing a linked scan
/// group in any dataset, always land on the same side. Each dataset gets
/// `round(ratio * patients)` training patients when its groups allow it.
pub fn split_scans(records: &[ScanRecord], ratio: f64, seed: u64) -> Result<SplitAssignment> {
    if !(ratio > 0.0 && ratio < 1.0) {
        return Err(Error::InvalidInput(format!("split ratio {ratio} outside (0, 1)")));
    }
    let mut sorted: Vec<&ScanRecord> = records.iter().collect();
    sorted.sort_by(|a, b| (&a.dataset_id, &a.scan_id).cmp(&(&b.dataset_id, &b.scan_id)));
    for w in sorted.windows(2) {
        if w[0].scan_id == w[1].scan_id {
            return Err(Error::InvalidInput(format!("duplicate scan id {:?}", w[0].scan_id)));
        }
    }

    let mut uf = UnionFind((0..sorted.len()).collect());
    let mut first_of_patient: BTreeMap<(&str, &str), usize> = BTreeMap::new();
    let mut first_of_group: BTreeMap<&str, usize> = BTreeMap::new();
    for (i, r) in sorted.iter().enumerate() {
        let p = *first_of_patient
            .entry((r.dataset_id.as_str(), r.patient_id.as_str()))
            .or_insert(i);
        uf.union(p, i);
        if let Some(g) = r.scan_group.as_deref() {
            let g = *first_of_group.entry(g).or_insert(i);
            uf.union(g, i);
        }
    }

    // Patients per component and dataset.
    let mut patients: BTreeMap<usize, BTreeMap<&str, usize>> = BTreeMap::new();
    let mut dataset_patients: BTreeMap<&str, usize> = BTreeMap::new();
    for ((d, _), i) in &first_of_patient {
        let root = uf.find(*i);
        *patients.entry(root).or_default().entry(d).or_default() += 1;
        *dataset_patients.entry(d).or_default() += 1;
    }
    let quota: BTreeMap<&str, usize> = dataset_patients
        .iter()
        .map(|(d, n)| (*d, (ratio * *n as f64 + 0.5).floor() as usize))
        .collect();

    let mut components: Vec<usize> = patients.keys().copied().collect();
    components.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut train: BTreeMap<&str, usize> = BTreeMap::new();
    let mut side: BTreeMap<usize, Split> = BTreeMap::new();
    for root in components {
        let fits = patients[&root]
            .iter()
            .all(|(d, k)| train.get(d).copied().unwrap_or(0) + k <= quota[d]);
        let s = if fits {
            for (d, k) in &patients[&root] {
                *train.entry(d).or_default() += k;
            }
            Split::Train
        } else {
            Split::Test
        };
        side.insert(root, s);
    }

    let assignments = sorted
        .iter()
        .enumerate()
        .map(|(i, r)| (r.scan_id.clone(), side[&uf.find(i)]))
        .collect();
    Ok(SplitAssignment {
        schema_version: crate::SCHEMA_VERSION,
        seed,
        ratio,
        assignments,
    })
}
