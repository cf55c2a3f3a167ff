//! Scan volumes, label volumes and the preprocessing chain applied to them.

mod crop;
mod intensity;
pub mod nifti;
mod orient;
mod resample;

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use ndarray::Array3;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Affine, Axcodes};

pub use crop::{crop_nonzero, crop_patch, nonzero_bbox};
pub use intensity::{normalize, percentile, CT_WINDOW, MR_PERCENTILES};
pub use nifti::{load_nifti, read_nifti, save_nifti, NiftiDtype, NiftiImage};
pub use orient::{reorient, Reorient};
pub use resample::{resample_grid_shape, Resample};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Modality {
    #[serde(alias = "ct")]
    CT,
    #[serde(alias = "mri", alias = "MR")]
    MRI,
    #[serde(alias = "pet")]
    PET,
}

impl Modality {
    pub fn tag(self) -> &'static str {
        match self {
            Modality::CT => "ct",
            Modality::MRI => "mri",
            Modality::PET => "pet",
        }
    }
}

impl fmt::Display for Modality {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

impl FromStr for Modality {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "ct" => Ok(Modality::CT),
            "mri" | "mr" => Ok(Modality::MRI),
            "pet" => Ok(Modality::PET),
            other => Err(Error::InvalidInput(format!("unknown modality {other:?}"))),
        }
    }
}

/// Single-channel scan on a voxel grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Volume {
    pub data: Array3<f64>,
    pub affine: Affine,
    pub modality: Modality,
}

impl Volume {
    pub fn new(data: Array3<f64>, affine: Affine, modality: Modality) -> Result<Self> {
        check_grid(data.shape())?;
        affine.validate()?;
        Ok(Volume {
            data,
            affine,
            modality,
        })
    }

    pub fn shape(&self) -> [usize; 3] {
        shape3(self.data.shape())
    }

    pub fn spacing(&self) -> [f64; 3] {
        self.affine.spacing()
    }

    pub fn axcodes(&self) -> Result<Axcodes> {
        self.affine.axcodes()
    }
}

/// Integer-coded annotation on the grid of a [`Volume`]. Code 0 is background.
#[derive(Debug, Clone, PartialEq)]
pub struct LabelVolume {
    pub data: Array3<u16>,
    pub affine: Affine,
    /// Label code to terminology id; empty until a class map is attached.
    pub code_map: BTreeMap<u16, String>,
}

impl LabelVolume {
    pub fn new(data: Array3<u16>, affine: Affine) -> Result<Self> {
        check_grid(data.shape())?;
        affine.validate()?;
        Ok(LabelVolume {
            data,
            affine,
            code_map: BTreeMap::new(),
        })
    }

    /// Attaches a code map; every nonzero code in the grid must be covered.
    pub fn with_code_map(mut self, code_map: BTreeMap<u16, String>) -> Result<Self> {
        if let Some(code) = self.codes().into_iter().find(|c| !code_map.contains_key(c)) {
            return Err(Error::UnmappedCode(code));
        }
        self.code_map = code_map;
        Ok(self)
    }

    pub fn shape(&self) -> [usize; 3] {
        shape3(self.data.shape())
    }

    pub fn spacing(&self) -> [f64; 3] {
        self.affine.spacing()
    }

    /// Distinct nonzero codes present, ascending.
    pub fn codes(&self) -> Vec<u16> {
        let mut seen = std::collections::BTreeSet::new();
        for &c in self.data.iter() {
            if c != 0 {
                seen.insert(c);
            }
        }
        seen.into_iter().collect()
    }

    pub fn foreground_count(&self) -> usize {
        self.data.iter().filter(|c| **c != 0).count()
    }
}

/// Patch window on a (zero-padded) grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PatchSpec {
    pub origin: [usize; 3],
    pub extent: [usize; 3],
}

impl PatchSpec {
    pub const DEFAULT_EXTENT: [usize; 3] = [288, 288, 96];

    pub fn new(origin: [usize; 3], extent: [usize; 3]) -> Result<Self> {
        if extent.contains(&0) {
            return Err(Error::InvalidInput("patch extent must be positive".into()));
        }
        Ok(PatchSpec { origin, extent })
    }

    /// Grid obtained by zero-padding `shape` at the far end up to the extent.
    pub fn padded_shape(shape: [usize; 3], extent: [usize; 3]) -> [usize; 3] {
        [
            shape[0].max(extent[0]),
            shape[1].max(extent[1]),
            shape[2].max(extent[2]),
        ]
    }

    /// True when the window lies inside the padded grid of `shape`.
    pub fn fits(&self, shape: [usize; 3]) -> bool {
        let padded = Self::padded_shape(shape, self.extent);
        (0..3).all(|a| self.origin[a] + self.extent[a] <= padded[a])
    }

    pub fn contains(&self, voxel: [usize; 3]) -> bool {
        (0..3).all(|a| voxel[a] >= self.origin[a] && voxel[a] < self.origin[a] + self.extent[a])
    }
}

pub(crate) fn shape3(s: &[usize]) -> [usize; 3] {
    [s[0], s[1], s[2]]
}

fn check_grid(shape: &[usize]) -> Result<()> {
    if shape.len() != 3 || shape.contains(&0) {
        return Err(Error::DimensionError(format!(
            "expected a non-empty 3D grid, got {shape:?}"
        )));
    }
    Ok(())
}
