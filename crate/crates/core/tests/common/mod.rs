//! Independent reference implementations shared by the integration tests
//! and the acceptance harness. Deliberately naive: all-pairs distances,
//! explicit loops, no reuse of library internals.
#![allow(dead_code)]

use std::collections::BTreeMap;

use ndarray::{Array2, Array3};
use rand::Rng;
use segkit::BinaryMask;

pub fn neighbours6(v: [usize; 3], shape: [usize; 3]) -> Vec<Option<[usize; 3]>> {
    let mut out = Vec::with_capacity(6);
    for a in 0..3 {
        for d in [-1i64, 1] {
            let x = v[a] as i64 + d;
            out.push((x >= 0 && x < shape[a] as i64).then(|| {
                let mut n = v;
                n[a] = x as usize;
                n
            }));
        }
    }
    out
}

pub fn set_voxels(m: &Array3<bool>) -> Vec<[usize; 3]> {
    m.indexed_iter().filter(|(_, v)| **v).map(|((i, j, k), _)| [i, j, k]).collect()
}

pub fn surface(m: &Array3<bool>) -> Vec<[usize; 3]> {
    let shape = [m.shape()[0], m.shape()[1], m.shape()[2]];
    set_voxels(m)
        .into_iter()
        .filter(|v| neighbours6(*v, shape).iter().any(|n| n.is_none_or(|n| !m[n])))
        .collect()
}

pub fn sq_dist(a: [usize; 3], b: [usize; 3], spacing: [f64; 3]) -> f64 {
    (0..3).map(|k| ((a[k] as f64 - b[k] as f64) * spacing[k]).powi(2)).sum()
}

pub fn brute_dsc(p: &Array3<bool>, g: &Array3<bool>) -> f64 {
    let (mut both, mut np, mut ng) = (0usize, 0usize, 0usize);
    for (a, b) in p.iter().zip(g.iter()) {
        both += (*a && *b) as usize;
        np += *a as usize;
        ng += *b as usize;
    }
    if np + ng == 0 {
        1.0
    } else {
        2.0 * both as f64 / (np + ng) as f64
    }
}

pub fn brute_nsd(p: &Array3<bool>, g: &Array3<bool>, spacing: [f64; 3], tau: f64) -> f64 {
    let (sp, sg) = (surface(p), surface(g));
    match (sp.is_empty(), sg.is_empty()) {
        (true, true) => return 1.0,
        (true, false) | (false, true) => return 0.0,
        _ => {}
    }
    let close = |from: &[[usize; 3]], to: &[[usize; 3]]| {
        from.iter()
            .filter(|a| to.iter().any(|b| sq_dist(**a, *b, spacing) <= tau * tau))
            .count()
    };
    (close(&sp, &sg) + close(&sg, &sp)) as f64 / (sp.len() + sg.len()) as f64
}

/// Squared distance from every voxel to the nearest set voxel, all pairs.
pub fn brute_sq_field(m: &Array3<bool>, spacing: [f64; 3]) -> Array3<f64> {
    let on = set_voxels(m);
    Array3::from_shape_fn(m.dim(), |(i, j, k)| {
        on.iter()
            .map(|b| sq_dist([i, j, k], *b, spacing))
            .fold(f64::INFINITY, f64::min)
    })
}

/// Union of a few random balls and boxes with sparse salt-and-pepper noise.
pub fn random_blobs<R: Rng>(rng: &mut R, n: usize, noise: f64) -> Array3<bool> {
    let shapes = rng.random_range(0..4);
    let mut m = Array3::from_elem((n, n, n), false);
    for _ in 0..shapes {
        let c: [f64; 3] = std::array::from_fn(|_| rng.random_range(0.0..n as f64));
        let r: [f64; 3] = std::array::from_fn(|_| rng.random_range(1.0..n as f64 / 2.5));
        let ball = rng.random_bool(0.5);
        for ((i, j, k), v) in m.indexed_iter_mut() {
            let d: Vec<f64> = [i, j, k].iter().zip(c).zip(r).map(|((x, c), r)| (*x as f64 - c) / r).collect();
            let inside = if ball {
                d.iter().map(|x| x * x).sum::<f64>() <= 1.0
            } else {
                d.iter().all(|x| x.abs() <= 1.0)
            };
            *v |= inside;
        }
    }
    m.mapv_inplace(|v| v ^ rng.random_bool(noise));
    m
}

/// A perturbed copy: shifted by up to one voxel per axis, with flips.
pub fn perturb<R: Rng>(rng: &mut R, m: &Array3<bool>, noise: f64) -> Array3<bool> {
    let s: [i64; 3] = std::array::from_fn(|_| rng.random_range(-1..=1));
    let sh = m.dim();
    Array3::from_shape_fn(sh, |(i, j, k)| {
        let src = [i as i64 - s[0], j as i64 - s[1], k as i64 - s[2]];
        let inside = src[0] >= 0 && src[1] >= 0 && src[2] >= 0 && src[0] < sh.0 as i64 && src[1] < sh.1 as i64 && src[2] < sh.2 as i64;
        let v = inside && m[[src[0] as usize, src[1] as usize, src[2] as usize]];
        v ^ rng.random_bool(noise)
    })
}

pub fn mask(data: Array3<bool>, spacing: [f64; 3]) -> BinaryMask {
    BinaryMask::new(data, spacing).unwrap()
}

/// Central-difference gradient of `f` at `x` with step `h`.
pub fn numeric_grad(x: &Array2<f64>, h: f64, f: impl Fn(&Array2<f64>) -> f64) -> Array2<f64> {
    let mut g = Array2::zeros(x.dim());
    let mut xp = x.clone();
    for idx in 0..x.len() {
        let (r, c) = (idx / x.ncols(), idx % x.ncols());
        let orig = xp[[r, c]];
        xp[[r, c]] = orig + h;
        let up = f(&xp);
        xp[[r, c]] = orig - h;
        let down = f(&xp);
        xp[[r, c]] = orig;
        g[[r, c]] = (up - down) / (2.0 * h);
    }
    g
}

/// `|a - n| / max(|a|, |n|)` in the Frobenius norm.
pub fn rel_err(a: &Array2<f64>, n: &Array2<f64>) -> f64 {
    let norm = |m: &Array2<f64>| m.iter().map(|v| v * v).sum::<f64>().sqrt();
    let diff = norm(&(a - n));
    let scale = norm(a).max(norm(n));
    if scale == 0.0 {
        diff
    } else {
        diff / scale
    }
}

/// Contrastive loss recomputed term by term.
pub fn contrastive_reference(z: &Array2<f64>, zp: &Array2<f64>, tau: f64, include_positive: bool) -> f64 {
    let n = z.nrows();
    let s = |i: usize, k: usize| z.row(i).dot(&zp.row(k)) / tau;
    let mut total = 0.0;
    for i in 0..n {
        let row: f64 = (0..n).filter(|k| include_positive || *k != i).map(|k| s(i, k).exp()).sum();
        let col: f64 = (0..n).filter(|k| include_positive || *k != i).map(|k| s(k, i).exp()).sum();
        total += -(s(i, i).exp() / row).ln() - (s(i, i).exp() / col).ln();
    }
    total / n as f64
}

/// BCE (clamped) plus soft dice recomputed from the definitions.
pub fn seg_reference(p: &Array2<f64>, s: &Array2<f64>) -> f64 {
    let eps = segkit::kernels::PROB_EPS;
    let n = p.len() as f64;
    let bce: f64 = p
        .iter()
        .zip(s.iter())
        .map(|(p, s)| {
            let p = p.clamp(eps, 1.0 - eps);
            -(s * p.ln() + (1.0 - s) * (1.0 - p).ln())
        })
        .sum::<f64>()
        / n;
    let inter: f64 = p.iter().zip(s.iter()).map(|(p, s)| p * s).sum();
    let den: f64 = p.iter().map(|v| v * v).sum::<f64>() + s.iter().map(|v| v * v).sum::<f64>();
    bce + if den > 0.0 { 1.0 - 2.0 * inter / den } else { 0.0 }
}

/// Random scan records with multi-scan patients and scan groups linking
/// datasets, shaped like a harmonized multi-dataset corpus.
pub fn random_corpus<R: Rng>(rng: &mut R) -> Vec<segkit::sampler::ScanRecord> {
    let datasets = rng.random_range(1..5);
    let groups = rng.random_range(1..12);
    let mut out = Vec::new();
    for d in 0..datasets {
        let patients = rng.random_range(1..10);
        for p in 0..patients {
            for s in 0..rng.random_range(1..4) {
                out.push(segkit::sampler::ScanRecord {
                    scan_id: format!("d{d}_p{p}_s{s}"),
                    dataset_id: format!("d{d}"),
                    patient_id: format!("p{p}"),
                    s_roi: rng.random_range(1..1_000_000),
                    classes: rng.random_range(1..40),
                    scan_group: rng.random_bool(0.4).then(|| format!("g{}", rng.random_range(0..groups))),
                });
            }
        }
    }
    out
}

/// Scan ids that share a patient or group but not a side; empty when the
/// split has no leakage.
pub fn leaks(records: &[segkit::sampler::ScanRecord], split: &segkit::sampler::SplitAssignment) -> Vec<String> {
    let mut side: BTreeMap<String, segkit::sampler::Split> = BTreeMap::new();
    let mut bad = Vec::new();
    for r in records {
        let s = split.get(&r.scan_id).expect("every scan assigned");
        let mut keys = vec![format!("patient:{}/{}", r.dataset_id, r.patient_id)];
        if let Some(g) = &r.scan_group {
            keys.push(format!("group:{g}"));
        }
        for k in keys {
            if *side.entry(k.clone()).or_insert(s) != s {
                bad.push(format!("{} via {k}", r.scan_id));
            }
        }
    }
    bad
}

/// Byte contents of every file under `root`, keyed by relative path.
pub fn tree(root: &std::path::Path) -> BTreeMap<String, Vec<u8>> {
    fn walk(root: &std::path::Path, dir: &std::path::Path, out: &mut BTreeMap<String, Vec<u8>>) {
        for e in std::fs::read_dir(dir).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                walk(root, &p, out);
            } else {
                let rel = p.strip_prefix(root).unwrap().to_string_lossy().into_owned();
                out.insert(rel, std::fs::read(&p).unwrap());
            }
        }
    }
    let mut out = BTreeMap::new();
    walk(root, root, &mut out);
    out
}
