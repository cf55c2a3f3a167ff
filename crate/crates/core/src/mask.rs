use ndarray::Array3;

use crate::error::{Error, Result};

/// Boolean voxel grid with physical spacing in millimetres.
#[derive(Debug, Clone, PartialEq)]
pub struct BinaryMask {
    pub data: Array3<bool>,
    pub spacing: [f64; 3],
}

impl BinaryMask {
    pub fn new(data: Array3<bool>, spacing: [f64; 3]) -> Result<Self> {
        if data.shape().contains(&0) {
            return Err(Error::InvalidInput("mask grid must be at least 1 voxel per axis".into()));
        }
        if spacing.iter().any(|s| !(*s > 0.0) || !s.is_finite()) {
            return Err(Error::InvalidInput(format!("invalid spacing {spacing:?}")));
        }
        Ok(BinaryMask { data, spacing })
    }

    pub fn empty(shape: [usize; 3], spacing: [f64; 3]) -> Self {
        BinaryMask {
            data: Array3::from_elem(shape, false),
            spacing,
        }
    }

    pub fn shape(&self) -> [usize; 3] {
        let s = self.data.shape();
        [s[0], s[1], s[2]]
    }

    pub fn count(&self) -> usize {
        self.data.iter().filter(|v| **v).count()
    }

    pub fn is_empty(&self) -> bool {
        !self.data.iter().any(|v| *v)
    }

    /// In-place voxel-wise OR.
    pub fn union_with(&mut self, other: &BinaryMask) -> Result<()> {
        if self.shape() != other.shape() {
            return Err(Error::ShapeMismatch(format!(
                "{:?} vs {:?}",
                self.shape(),
                other.shape()
            )));
        }
        ndarray::Zip::from(&mut self.data)
            .and(&other.data)
            .for_each(|a, b| *a |= *b);
        Ok(())
    }

    pub(crate) fn check_same_grid(&self, other: &BinaryMask) -> Result<()> {
        if self.shape() != other.shape() {
            return Err(Error::ShapeMismatch(format!(
                "{:?} vs {:?}",
                self.shape(),
                other.shape()
            )));
        }
        Ok(())
    }
}
