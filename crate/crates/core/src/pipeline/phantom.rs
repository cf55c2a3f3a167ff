use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use ndarray::Array3;
use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::{DatasetManifest, RunConfig, ScanEntry};
use crate::error::{Error, Result};
use crate::geometry::{Affine, Axcodes};
use crate::labels::{term_id, ClassMap, MergeRule, MergeRules};
use crate::mask::BinaryMask;
use crate::volume::{save_nifti, Modality, NiftiDtype};

/// Field of view of every phantom, RAS millimetres.
const FOV_MIN: [f64; 3] = [-32.0, -32.0, -48.0];
const FOV_MAX: [f64; 3] = [32.0, 32.0, 48.0];
const ORIENTATIONS: [&str; 6] = ["RAS", "LPS", "LAS", "RPI", "ASR", "PIL"];
const INPLANE_SPACING: [f64; 3] = [1.0, 1.25, 2.0];
const AXIAL_SPACING: [f64; 3] = [1.5, 2.0, 3.0];

/// Phantom structures. `Liver` is the full ball, stored on disk as a rind
/// around `Tumor` and recovered by a merge rule.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum PhantomClass {
    Spleen,
    Bladder,
    Stomach,
    Liver,
    Tumor,
}

impl PhantomClass {
    pub const ALL: [PhantomClass; 5] = [
        PhantomClass::Spleen,
        PhantomClass::Bladder,
        PhantomClass::Stomach,
        PhantomClass::Liver,
        PhantomClass::Tumor,
    ];

    pub fn name(self) -> &'static str {
        match self {
            PhantomClass::Spleen => "spleen",
            PhantomClass::Bladder => "urinary bladder",
            PhantomClass::Stomach => "stomach",
            PhantomClass::Liver => "liver",
            PhantomClass::Tumor => "liver tumor",
        }
    }

    pub fn term_id(self) -> String {
        term_id(self.name(), Modality::CT)
    }

    /// Whether every axial slice of the structure is an axis-aligned rectangle.
    pub fn is_rectangular(self) -> bool {
        self == PhantomClass::Bladder
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Ball {
    pub center: [f64; 3],
    pub radius: f64,
}

impl Ball {
    pub fn contains(&self, p: [f64; 3]) -> bool {
        let d2: f64 = (0..3).map(|a| (p[a] - self.center[a]).powi(2)).sum();
        d2 <= self.radius * self.radius
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Cuboid {
    pub lo: [f64; 3],
    pub hi: [f64; 3],
}

impl Cuboid {
    pub fn contains(&self, p: [f64; 3]) -> bool {
        (0..3).all(|a| p[a] >= self.lo[a] && p[a] <= self.hi[a])
    }
}

/// Geometry of one phantom scan in world space.
#[derive(Debug, Clone, PartialEq)]
pub struct PhantomScene {
    pub body: [f64; 3],
    pub spleen: Ball,
    pub bladder: Cuboid,
    /// Union of two cuboids sharing a corner, extruded along the axial axis.
    pub stomach: [Cuboid; 2],
    pub liver: Ball,
    pub tumor: Ball,
}

impl PhantomScene {
    pub fn random(rng: &mut impl Rng) -> Self {
        let mut j = |v: f64, amp: f64| v + rng.random_range(-amp..=amp);
        let shift = [j(0.0, 3.0), j(0.0, 3.0), j(0.0, 3.0)];
        let at = |p: [f64; 3]| [p[0] + shift[0], p[1] + shift[1], p[2] + shift[2]];
        let liver_r = j(10.0, 1.0);
        let liver_c = at([-12.0, -10.0, -16.0]);
        let tumor_r = j(4.5, 0.5);
        let tumor_c = [liver_c[0] + j(0.0, 2.0), liver_c[1] + j(0.0, 2.0), liver_c[2]];
        PhantomScene {
            body: [30.0, 28.0, 46.0],
            spleen: Ball {
                center: at([-16.0, 8.0, 12.0]),
                radius: j(7.0, 1.0),
            },
            bladder: Cuboid {
                lo: at([6.0, -16.0, -32.0]),
                hi: at([18.0, -5.0, -16.0]),
            },
            stomach: [
                Cuboid {
                    lo: at([4.0, 6.0, 18.0]),
                    hi: at([20.0, 12.0, 34.0]),
                },
                Cuboid {
                    lo: at([4.0, 6.0, 18.0]),
                    hi: at([10.0, 22.0, 34.0]),
                },
            ],
            liver: Ball {
                center: liver_c,
                radius: liver_r,
            },
            tumor: Ball {
                center: tumor_c,
                radius: tumor_r,
            },
        }
    }

    pub fn in_body(&self, p: [f64; 3]) -> bool {
        (0..3).map(|a| (p[a] / self.body[a]).powi(2)).sum::<f64>() <= 1.0
    }

    pub fn contains(&self, class: PhantomClass, p: [f64; 3]) -> bool {
        match class {
            PhantomClass::Spleen => self.spleen.contains(p),
            PhantomClass::Bladder => self.bladder.contains(p),
            PhantomClass::Stomach => self.stomach.iter().any(|c| c.contains(p)),
            PhantomClass::Liver => self.liver.contains(p),
            PhantomClass::Tumor => self.tumor.contains(p),
        }
    }

    /// Innermost structure at `p`; the tumor wins over the liver around it.
    pub fn class_at(&self, p: [f64; 3]) -> Option<PhantomClass> {
        [
            PhantomClass::Tumor,
            PhantomClass::Liver,
            PhantomClass::Spleen,
            PhantomClass::Bladder,
            PhantomClass::Stomach,
        ]
        .into_iter()
        .find(|c| self.contains(*c, p))
    }

    /// Analytic mask of a structure sampled at voxel centres.
    pub fn mask(&self, class: PhantomClass, grid: &PhantomGrid) -> BinaryMask {
        let data = grid.map(|p| self.contains(class, p));
        BinaryMask::new(data, grid.affine.spacing()).expect("phantom grids are valid")
    }
}

fn base_hu(c: Option<PhantomClass>) -> f64 {
    match c {
        Some(PhantomClass::Spleen) => 90.0,
        Some(PhantomClass::Bladder) => 10.0,
        Some(PhantomClass::Stomach) => 60.0,
        Some(PhantomClass::Liver) => 110.0,
        Some(PhantomClass::Tumor) => 160.0,
        None => 40.0,
    }
}

/// Axis-aligned voxel grid covering the phantom field of view.
#[derive(Debug, Clone, PartialEq)]
pub struct PhantomGrid {
    pub shape: [usize; 3],
    pub affine: Affine,
}

impl PhantomGrid {
    /// `spacing` is per world axis (x, y, z).
    pub fn new(axcodes: Axcodes, spacing: [f64; 3]) -> Self {
        let mut rows = [[0.0; 4]; 4];
        rows[3][3] = 1.0;
        let mut shape = [0; 3];
        for (a, (w, positive)) in axcodes.world_axes().into_iter().enumerate() {
            let s = spacing[w];
            shape[a] = ((FOV_MAX[w] - FOV_MIN[w]) / s).floor() as usize;
            rows[w][a] = if positive { s } else { -s };
            rows[w][3] = if positive { FOV_MIN[w] + s / 2.0 } else { FOV_MAX[w] - s / 2.0 };
        }
        PhantomGrid {
            shape,
            affine: Affine::from_rows(rows),
        }
    }

    pub fn random(rng: &mut impl Rng) -> Self {
        let codes: Axcodes = ORIENTATIONS.choose(rng).unwrap().parse().unwrap();
        let xy = *INPLANE_SPACING.choose(rng).unwrap();
        let z = *AXIAL_SPACING.choose(rng).unwrap();
        PhantomGrid::new(codes, [xy, xy, z])
    }

    pub fn map<T>(&self, mut f: impl FnMut([f64; 3]) -> T) -> Array3<T> {
        Array3::from_shape_fn(self.shape, |(i, j, k)| f(self.affine.apply([i as f64, j as f64, k as f64])))
    }
}

/// Desk-scale corpus: three CT datasets, `scans_per_dataset` scans each.
///
/// * `phantom_a` labels all five classes, one patient per scan.
/// * `phantom_b` labels spleen, stomach and bladder with a different code
///   order; each patient contributes two scans.
/// * `phantom_c` re-annotates the images of `phantom_a` (linked by scan
///   group) with the liver and a tumor split into two synonym codes.
#[derive(Debug, Clone, PartialEq)]
pub struct PhantomSpec {
    pub seed: u64,
    pub scans_per_dataset: usize,
    pub noise_sd: f64,
}

impl Default for PhantomSpec {
    fn default() -> Self {
        PhantomSpec {
            seed: 0,
            scans_per_dataset: 4,
            noise_sd: 10.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PhantomOutput {
    pub manifests: Vec<PathBuf>,
    pub config: PathBuf,
}

fn codes_a(c: PhantomClass) -> u16 {
    c as u16 + 1
}

fn class_map(dataset: &str, entries: &[(u16, PhantomClass)]) -> ClassMap {
    ClassMap::new(dataset, entries.iter().map(|(c, k)| (*c, k.term_id())).collect::<BTreeMap<_, _>>())
}

fn write_labels(path: &Path, grid: &PhantomGrid, scene: &PhantomScene, code: impl Fn(Option<PhantomClass>, [f64; 3]) -> u16) -> Result<()> {
    let data = grid.map(|p| f64::from(code(scene.class_at(p), p)));
    save_nifti(path, data.view(), &grid.affine, NiftiDtype::U8)
}

/// Writes the phantom corpus, its manifests, merge rules and a run config
/// under `out`.
pub fn synth_phantom(out: &Path, spec: &PhantomSpec) -> Result<PhantomOutput> {
    if spec.scans_per_dataset == 0 {
        return Err(Error::InvalidConfig("phantom needs at least one scan per dataset".into()));
    }
    if !(spec.noise_sd >= 0.0 && spec.noise_sd.is_finite()) {
        return Err(Error::InvalidConfig(format!("noise sd {} must be non-negative", spec.noise_sd)));
    }
    let noise = Normal::new(0.0, spec.noise_sd).unwrap();
    let mut manifests = Vec::new();
    let mut scans: BTreeMap<&str, Vec<ScanEntry>> = BTreeMap::new();

    for (d, ds) in ["phantom_a", "phantom_b"].into_iter().enumerate() {
        for i in 0..spec.scans_per_dataset {
            let scan_id = format!("{}_{i:03}", &ds[8..]);
            // Every scan gets its own stream, so outputs do not depend on order.
            let mut rng = ChaCha8Rng::seed_from_u64(spec.seed ^ ((d as u64 + 1) << 32) ^ i as u64);
            let grid = PhantomGrid::random(&mut rng);
            let scene = PhantomScene::random(&mut rng);
            let image = grid.map(|p| {
                let c = scene.class_at(p);
                if c.is_none() && !scene.in_body(p) {
                    0.0
                } else {
                    (base_hu(c) + noise.sample(&mut rng)).round()
                }
            });
            let dir = out.join(ds);
            save_nifti(dir.join("img").join(format!("{scan_id}.nii.gz")), image.view(), &grid.affine, NiftiDtype::I16)?;
            let lbl = dir.join("lbl").join(format!("{scan_id}.nii.gz"));
            let patient_id;
            let mut scan_group = None;
            if d == 0 {
                patient_id = format!("a_p{i}");
                scan_group = Some(format!("shared_{i:03}"));
                write_labels(&lbl, &grid, &scene, |c, _| c.map_or(0, codes_a))?;
                let lbl_c = out.join("phantom_c").join("lbl").join(format!("c_{i:03}.nii.gz"));
                let tumor_z = scene.tumor.center[2];
                write_labels(&lbl_c, &grid, &scene, |c, p| match c {
                    Some(PhantomClass::Liver) => 1,
                    Some(PhantomClass::Tumor) if p[2] >= tumor_z => 2,
                    Some(PhantomClass::Tumor) => 3,
                    _ => 0,
                })?;
                scans.entry("phantom_c").or_default().push(ScanEntry {
                    scan_id: format!("c_{i:03}"),
                    patient_id: format!("c_p{i}"),
                    image: PathBuf::from("../phantom_a/img").join(format!("{scan_id}.nii.gz")),
                    labels: PathBuf::from("lbl").join(format!("c_{i:03}.nii.gz")),
                    scan_group: scan_group.clone(),
                });
            } else {
                patient_id = format!("b_p{}", i / 2);
                write_labels(&lbl, &grid, &scene, |c, _| match c {
                    Some(PhantomClass::Spleen) => 1,
                    Some(PhantomClass::Stomach) => 2,
                    Some(PhantomClass::Bladder) => 3,
                    _ => 0,
                })?;
            }
            scans.entry(ds).or_default().push(ScanEntry {
                scan_id: scan_id.clone(),
                patient_id,
                image: PathBuf::from("img").join(format!("{scan_id}.nii.gz")),
                labels: PathBuf::from("lbl").join(format!("{scan_id}.nii.gz")),
                scan_group,
            });
        }
    }

    let mut maps = BTreeMap::new();
    maps.insert("phantom_a", class_map("phantom_a", &PhantomClass::ALL.map(|c| (codes_a(c), c))));
    maps.insert(
        "phantom_b",
        class_map(
            "phantom_b",
            &[(1, PhantomClass::Spleen), (2, PhantomClass::Stomach), (3, PhantomClass::Bladder)],
        ),
    );
    let mut cm = class_map(
        "phantom_c",
        &[(1, PhantomClass::Liver), (2, PhantomClass::Tumor), (3, PhantomClass::Tumor)],
    );
    cm.synonyms.insert(PhantomClass::Tumor.term_id());
    maps.insert("phantom_c", cm);

    for (ds, map) in maps {
        let dir = out.join(ds);
        map.save(dir.join("classmap.json"))?;
        let m = DatasetManifest {
            schema_version: crate::SCHEMA_VERSION,
            dataset_id: ds.to_string(),
            modality: Modality::CT,
            class_map: "classmap.json".into(),
            default_region: None,
            scans: scans.remove(ds).unwrap_or_default(),
            base_dir: dir.clone(),
        };
        let path = dir.join("manifest.json");
        m.save(&path)?;
        manifests.push(path);
    }

    MergeRules::new(vec![MergeRule {
        parent: PhantomClass::Liver.term_id(),
        children: vec![PhantomClass::Tumor.term_id()],
    }])
    .save(out.join("merge_rules.json"))?;
    let config = RunConfig {
        seed: spec.seed,
        merge_rules: Some("merge_rules.json".into()),
        ..Default::default()
    };
    let config_path = out.join("config.json");
    crate::labels::write_json(&config_path, &config)?;
    Ok(PhantomOutput {
        manifests,
        config: config_path,
    })
}
