use std::fs;
use std::path::Path;

use ndarray::{Array1, Array2, ArrayD, IxDyn};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct TensorEntry {
    name: String,
    shape: Vec<usize>,
    /// Offset into the blob, in elements.
    offset: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct Manifest {
    schema_version: u32,
    seed: u64,
    tensors: Vec<TensorEntry>,
}

/// Named `f64` tensors stored as one little-endian blob plus a JSON manifest
/// of names, shapes and offsets.
#[derive(Debug, Clone, PartialEq)]
pub struct TensorSet {
    pub seed: u64,
    tensors: Vec<(String, ArrayD<f64>)>,
}

impl TensorSet {
    pub fn new(seed: u64) -> Self {
        TensorSet { seed, tensors: Vec::new() }
    }

    pub fn push(&mut self, name: &str, t: ArrayD<f64>) {
        self.tensors.push((name.to_string(), t));
    }

    pub fn push_scalar(&mut self, name: &str, v: f64) {
        self.push(name, ArrayD::from_elem(IxDyn(&[]), v));
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.tensors.iter().map(|(n, _)| n.as_str())
    }

    pub fn get_opt(&self, name: &str) -> Option<&ArrayD<f64>> {
        self.tensors.iter().find(|(n, _)| n == name).map(|(_, t)| t)
    }

    pub fn get(&self, name: &str) -> Result<&ArrayD<f64>> {
        self.get_opt(name)
            .ok_or_else(|| Error::InvalidInput(format!("parameter set has no tensor {name:?}")))
    }

    pub fn scalar(&self, name: &str) -> Result<f64> {
        let t = self.get(name)?;
        t.iter()
            .next()
            .copied()
            .filter(|_| t.len() == 1)
            .ok_or_else(|| Error::ShapeMismatch(format!("{name} is not a scalar")))
    }

    pub(crate) fn as2(t: &ArrayD<f64>) -> Result<Array2<f64>> {
        t.clone()
            .into_dimensionality()
            .map_err(|_| Error::ShapeMismatch(format!("expected a matrix, got shape {:?}", t.shape())))
    }

    pub fn matrix(&self, name: &str) -> Result<Array2<f64>> {
        Self::as2(self.get(name)?)
    }

    pub fn vector(&self, name: &str) -> Result<Array1<f64>> {
        let t = self.get(name)?;
        t.clone()
            .into_dimensionality()
            .map_err(|_| Error::ShapeMismatch(format!("{name}: expected a vector, got shape {:?}", t.shape())))
    }

    pub fn save(&self, blob: impl AsRef<Path>, manifest: impl AsRef<Path>) -> Result<()> {
        let mut bytes = Vec::new();
        let mut entries = Vec::new();
        let mut offset = 0;
        for (name, t) in &self.tensors {
            entries.push(TensorEntry {
                name: name.clone(),
                shape: t.shape().to_vec(),
                offset,
            });
            offset += t.len();
            bytes.extend(t.iter().flat_map(|v| v.to_le_bytes()));
        }
        fs::write(blob.as_ref(), bytes).map_err(|e| Error::io(blob.as_ref(), e))?;
        let m = Manifest {
            schema_version: crate::SCHEMA_VERSION,
            seed: self.seed,
            tensors: entries,
        };
        crate::labels::write_json(manifest.as_ref(), &m)
    }

    pub fn load(blob: impl AsRef<Path>, manifest: impl AsRef<Path>) -> Result<Self> {
        let m: Manifest = crate::labels::read_json(manifest.as_ref())?;
        let bytes = fs::read(blob.as_ref()).map_err(|e| Error::io(blob.as_ref(), e))?;
        let values: Vec<f64> = bytes
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        let mut tensors = Vec::new();
        for e in m.tensors {
            let n: usize = e.shape.iter().product();
            let data = values
                .get(e.offset..e.offset + n)
                .ok_or_else(|| Error::InvalidInput(format!("tensor {} runs past the end of the blob", e.name)))?;
            tensors.push((e.name, ArrayD::from_shape_vec(IxDyn(&e.shape), data.to_vec()).unwrap()));
        }
        Ok(TensorSet { seed: m.seed, tensors })
    }
}
