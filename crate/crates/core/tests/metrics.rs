mod common;

use common::*;
use ndarray::Array3;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use segkit::metrics::{aggregate, distance_field, dsc, nsd, nsd_with, squared_distance_field, tight_box, MetricsRecord, Tolerance, AXIAL};
use segkit::{BinaryMask, Catalog};

const SPACINGS: [[f64; 3]; 3] = [[1.0, 1.0, 3.0], [0.5, 2.0, 1.25], [0.75, 0.75, 2.5]];

#[test]
fn dsc_and_nsd_match_brute_force() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for case in 0..40 {
        let spacing = SPACINGS[case % 3];
        let g = random_blobs(&mut rng, 10, 0.01);
        let p = perturb(&mut rng, &g, 0.02);
        let (pm, gm) = (mask(p.clone(), spacing), mask(g.clone(), spacing));
        assert_eq!(dsc(&pm, &gm).unwrap(), brute_dsc(&p, &g));
        for tau in [0.0, 1.0, 2.5] {
            assert_eq!(nsd(&pm, &gm, tau).unwrap(), brute_nsd(&p, &g, spacing, tau), "case {case} tau {tau}");
        }
        assert_eq!(nsd_with(&pm, &gm, Tolerance::Voxels(1.0)).unwrap(), brute_nsd(&p, &g, [1.0; 3], 1.0));
    }
}

#[test]
fn edt_matches_all_pairs_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    for case in 0..12 {
        let spacing = SPACINGS[case % 3];
        let m = random_blobs(&mut rng, 9, 0.03);
        let want = brute_sq_field(&m, spacing);
        assert_eq!(squared_distance_field(m.view(), spacing), want);
        if m.iter().any(|v| *v) {
            assert_eq!(distance_field(&mask(m, spacing)).unwrap(), want.mapv(f64::sqrt));
        }
    }
}

#[test]
fn tight_boxes_cover_every_slice() {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let g = random_blobs(&mut rng, 12, 0.0);
    let gm = mask(g.clone(), [1.0; 3]);
    let Ok(boxes) = tight_box(&gm, AXIAL) else { return };
    for b in &boxes {
        for ((i, j, k), v) in g.indexed_iter() {
            if *v && k == b.slice {
                assert!(b.min[0] <= i && i <= b.max[0] && b.min[1] <= j && j <= b.max[1]);
            }
        }
    }
}

#[test]
fn report_views_of_a_single_record() {
    let rec = MetricsRecord {
        term_id: "liver_ct".into(),
        dataset_id: "d".into(),
        scan_id: "s".into(),
        dsc: 0.42,
        nsd: 0.37,
    };
    let r = aggregate(&[rec], &Catalog::default_catalog()).unwrap();
    assert_eq!((r.classes[0].dsc, r.classes[0].nsd), (0.42, 0.37));
    assert_eq!((r.datasets[0].dsc, r.datasets[0].nsd), (0.42, 0.37));
    let region = r.regions.iter().find(|g| g.records == 1).unwrap();
    assert_eq!((region.dsc, region.nsd), (0.42, 0.37));
    assert_eq!(r.all.dsc, 0.42);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn metrics_are_symmetric_and_bounded(seed in any::<u64>(), s in 0usize..3) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = random_blobs(&mut rng, 8, 0.02);
        let b = perturb(&mut rng, &a, 0.05);
        let (am, bm) = (mask(a, SPACINGS[s]), mask(b, SPACINGS[s]));
        let d = dsc(&am, &bm).unwrap();
        let n = nsd(&am, &bm, 1.0).unwrap();
        prop_assert_eq!(d, dsc(&bm, &am).unwrap());
        prop_assert_eq!(n, nsd(&bm, &am, 1.0).unwrap());
        prop_assert!((0.0..=1.0).contains(&d) && (0.0..=1.0).contains(&n));
        prop_assert_eq!(dsc(&am, &am).unwrap(), 1.0);
        prop_assert_eq!(nsd(&am, &am, 0.0).unwrap(), 1.0);
    }

    #[test]
    fn nsd_grows_with_tolerance(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = random_blobs(&mut rng, 8, 0.0);
        let b = perturb(&mut rng, &a, 0.03);
        let (am, bm) = (mask(a, [1.0, 1.0, 3.0]), mask(b, [1.0, 1.0, 3.0]));
        let mut last = 0.0;
        for tau in [0.0, 0.5, 1.0, 2.0, 4.0, 100.0] {
            let n = nsd(&am, &bm, tau).unwrap();
            prop_assert!(n >= last);
            last = n;
        }
        if !am.is_empty() && !bm.is_empty() {
            prop_assert_eq!(last, 1.0);
        }
    }
}

#[test]
fn mismatched_grids_are_rejected() {
    let a = BinaryMask::empty([4, 4, 4], [1.0; 3]);
    let b = BinaryMask::empty([4, 4, 5], [1.0; 3]);
    assert!(dsc(&a, &b).is_err());
    let c = BinaryMask::new(Array3::from_elem((4, 4, 4), true), [1.0, 1.0, 2.0]).unwrap();
    assert!(nsd(&a, &c, 1.0).is_err());
}

fn permuted(m: &BinaryMask, order: [usize; 3]) -> BinaryMask {
    let data = m.data.clone().permuted_axes(order).as_standard_layout().to_owned();
    BinaryMask::new(data, order.map(|a| m.spacing[a])).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn metrics_ignore_axis_order(seed in any::<u64>(), perm in 0usize..6) {
        const ORDERS: [[usize; 3]; 6] = [[0, 1, 2], [0, 2, 1], [1, 0, 2], [1, 2, 0], [2, 0, 1], [2, 1, 0]];
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = mask(random_blobs(&mut rng, 7, 0.02), [1.0, 1.0, 3.0]);
        let b = mask(perturb(&mut rng, &a.data, 0.03), [1.0, 1.0, 3.0]);
        let (pa, pb) = (permuted(&a, ORDERS[perm]), permuted(&b, ORDERS[perm]));
        prop_assert_eq!(dsc(&a, &b).unwrap(), dsc(&pa, &pb).unwrap());
        prop_assert_eq!(nsd(&a, &b, 2.0).unwrap(), nsd(&pa, &pb, 2.0).unwrap());
    }

    #[test]
    fn distance_field_is_lipschitz(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let spacing = [0.5, 2.0, 1.25];
        let m = mask(random_blobs(&mut rng, 8, 0.02), spacing);
        prop_assume!(!m.is_empty());
        let d = distance_field(&m).unwrap();
        for ((i, j, k), v) in d.indexed_iter() {
            prop_assert!(*v >= 0.0);
            prop_assert_eq!(*v == 0.0, m.data[[i, j, k]]);
            let idx = [i, j, k];
            for a in 0..3 {
                if idx[a] + 1 < 8 {
                    let mut n = idx;
                    n[a] += 1;
                    prop_assert!((d[n] - v).abs() <= spacing[a] + 1e-12);
                }
            }
        }
    }

    #[test]
    fn cell_means_reconstruct_the_grand_mean(seed in any::<u64>()) {
        use rand::Rng;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let terms = ["liver_ct", "spleen_ct", "brain_mri", "liver_tumor_ct"];
        let records: Vec<MetricsRecord> = (0..rng.random_range(1..40))
            .map(|i| MetricsRecord {
                term_id: terms[rng.random_range(0..terms.len())].into(),
                dataset_id: format!("d{}", rng.random_range(0..3)),
                scan_id: format!("s{i}"),
                dsc: rng.random_range(0.0..=1.0),
                nsd: rng.random_range(0.0..=1.0),
            })
            .collect();
        let r = aggregate(&records, &Catalog::default_catalog()).unwrap();
        let n: usize = r.cells.iter().map(|c| c.count).sum();
        prop_assert_eq!(n, records.len());
        let weighted = r.cells.iter().map(|c| c.dsc * c.count as f64).sum::<f64>() / n as f64;
        let direct = records.iter().map(|x| x.dsc).sum::<f64>() / n as f64;
        prop_assert!((weighted - direct).abs() <= 1e-12);
    }
}
