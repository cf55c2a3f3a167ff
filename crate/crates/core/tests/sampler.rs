mod common;

use std::collections::BTreeMap;

use common::*;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use segkit::sampler::*;

fn rec(d: &str, s: &str, s_roi: u64, classes: u32) -> ScanRecord {
    ScanRecord {
        scan_id: s.into(),
        dataset_id: d.into(),
        patient_id: s.into(),
        s_roi,
        classes,
        scan_group: None,
    }
}

#[test]
fn full_patch_of_full_prompts_repeats_once() {
    let r = rec("d", "s", 288 * 288 * 96, 32);
    assert_eq!(repeat_factor(&r, DEFAULT_PATCH_VOXELS, DEFAULT_PROMPT_CAP), 1);
    let r = rec("d", "s", 288 * 288 * 96 * 5 / 2, 32);
    assert_eq!(repeat_factor(&r, DEFAULT_PATCH_VOXELS, DEFAULT_PROMPT_CAP), 3);
    let r = rec("d", "s", 1, 1);
    assert_eq!(repeat_factor(&r, DEFAULT_PATCH_VOXELS, DEFAULT_PROMPT_CAP), 1);
}

#[test]
fn draw_frequencies_follow_the_plan() {
    let records = vec![
        rec("a", "a0", 4_000_000, 10),
        rec("a", "a1", 9_000_000, 20),
        rec("a", "a2", 100, 1),
        rec("a", "a3", 100, 1),
        rec("b", "b0", 30_000_000, 32),
    ];
    let plan = build_plan(&records, 5, DEFAULT_PATCH_VOXELS, DEFAULT_PROMPT_CAP).unwrap();
    // 1/sqrt(N) dataset weights split evenly over the dataset's scans, times R.
    let r = |x: &ScanRecord| ((x.s_roi as f64 * x.classes as f64 / (288.0 * 288.0 * 96.0 * 32.0)) + 0.5).floor().max(1.0);
    let n = |d: &str| records.iter().filter(|x| x.dataset_id == d).count() as f64;
    let mass: BTreeMap<&str, f64> = records
        .iter()
        .map(|x| (x.scan_id.as_str(), 1.0 / n(&x.dataset_id).sqrt() / n(&x.dataset_id) * r(x)))
        .collect();
    let total: f64 = mass.values().sum();
    let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
    let mut sampler = ScanSampler::new(&plan).unwrap();
    let draws = 100_000;
    for _ in 0..draws {
        *counts.entry(sampler.draw_scan()).or_default() += 1;
    }
    for (scan, m) in &mass {
        let f = counts.get(scan).copied().unwrap_or(0) as f64 / draws as f64;
        assert!((f - m / total).abs() <= 0.02, "{scan}: {f} vs {}", m / total);
    }
}

#[test]
fn same_seed_same_split() {
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    let corpus = random_corpus(&mut rng);
    assert_eq!(split_scans(&corpus, 0.8, 9).unwrap(), split_scans(&corpus, 0.8, 9).unwrap());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn split_never_leaks(seed in any::<u64>(), ratio in 0.05f64..0.95) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let corpus = random_corpus(&mut rng);
        let split = split_scans(&corpus, ratio, seed).unwrap();
        prop_assert_eq!(split.assignments.len(), corpus.len());
        prop_assert!(leaks(&corpus, &split).is_empty());
    }

    #[test]
    fn plan_probabilities_sum_to_one(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let corpus = random_corpus(&mut rng);
        let plan = build_plan(&corpus, seed, DEFAULT_PATCH_VOXELS, DEFAULT_PROMPT_CAP).unwrap();
        let p = plan.probabilities();
        prop_assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        prop_assert!(plan.entries.iter().all(|e| e.repeats >= 1));
    }
}

#[test]
fn equal_weights_draw_uniformly() {
    let records: Vec<_> = (0..10).map(|i| rec("d", &format!("s{i}"), 1, 1)).collect();
    let plan = build_plan(&records, 77, DEFAULT_PATCH_VOXELS, DEFAULT_PROMPT_CAP).unwrap();
    let mut sampler = ScanSampler::new(&plan).unwrap();
    let mut counts = [0f64; 10];
    for _ in 0..100_000 {
        counts[sampler.draw_index()] += 1.0;
    }
    let chi2: f64 = counts.iter().map(|c| (c - 10_000.0).powi(2) / 10_000.0).sum();
    // 99th percentile of chi-square with 9 degrees of freedom.
    assert!(chi2 < 21.666, "chi2 = {chi2}");
}

proptest! {
    #[test]
    fn repeat_factor_is_monotone(s in 1u64..100_000_000, ds in 0u64..10_000_000, m in 1u32..64, dm in 0u32..8) {
        let base = repeat_factor(&rec("d", "s", s, m), DEFAULT_PATCH_VOXELS, DEFAULT_PROMPT_CAP);
        prop_assert!(repeat_factor(&rec("d", "s", s + ds, m), DEFAULT_PATCH_VOXELS, DEFAULT_PROMPT_CAP) >= base);
        prop_assert!(repeat_factor(&rec("d", "s", s, m + dm), DEFAULT_PATCH_VOXELS, DEFAULT_PROMPT_CAP) >= base);
    }

    #[test]
    fn dataset_mass_is_conserved(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let corpus = random_corpus(&mut rng);
        let plan = build_plan(&corpus, seed, DEFAULT_PATCH_VOXELS, DEFAULT_PROMPT_CAP).unwrap();
        let mut counts: BTreeMap<String, usize> = BTreeMap::new();
        for r in &corpus {
            *counts.entry(r.dataset_id.clone()).or_default() += 1;
        }
        let weights = dataset_weights(&counts).unwrap();
        for (d, w) in &weights {
            let mass: f64 = plan.entries.iter().filter(|e| &e.dataset_id == d).map(|e| e.weight).sum();
            prop_assert!((mass - w).abs() < 1e-12);
        }
    }
}
