use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use ndarray::{Array1, Array2, ArrayView2};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::Embedding;
use crate::error::{Error, Result};

/// Deterministic map from prompt text to a `dim()`-vector.
pub trait EmbeddingProvider {
    fn dim(&self) -> usize;
    fn embed(&self, text: &str) -> Result<Embedding>;
}

/// Seeded hash of the text expanded into a Gaussian vector, unit length.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ToyHashProvider {
    dim: usize,
    seed: u64,
}

impl ToyHashProvider {
    pub fn new(dim: usize, seed: u64) -> Self {
        ToyHashProvider { dim, seed }
    }
}

impl EmbeddingProvider for ToyHashProvider {
    fn dim(&self) -> usize {
        self.dim
    }

    fn embed(&self, text: &str) -> Result<Embedding> {
        let mut h = Sha256::new();
        h.update(self.seed.to_le_bytes());
        h.update(text.as_bytes());
        let key: [u8; 32] = h.finalize().into();
        let mut rng = ChaCha8Rng::from_seed(key);
        let v: Array1<f64> = (0..self.dim).map(|_| StandardNormal.sample(&mut rng)).collect();
        Ok(unit(v))
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct Sidecar {
    schema_version: u32,
    dim: usize,
    rows: BTreeMap<String, usize>,
}

/// Externally computed embeddings: little-endian `f64` rows plus a JSON
/// sidecar mapping prompt text to a row index.
#[derive(Debug, Clone)]
pub struct FileProvider {
    table: Array2<f64>,
    rows: BTreeMap<String, usize>,
}

impl FileProvider {
    pub fn load(bin: impl AsRef<Path>, sidecar: impl AsRef<Path>) -> Result<Self> {
        let (bin, sidecar) = (bin.as_ref(), sidecar.as_ref());
        let meta: Sidecar = crate::labels::read_json(sidecar)?;
        let bytes = fs::read(bin).map_err(|e| Error::io(bin, e))?;
        if meta.dim == 0 || bytes.len() % (8 * meta.dim) != 0 {
            return Err(Error::InvalidInput(format!(
                "{} holds {} bytes, not a whole number of {}-d rows",
                bin.display(),
                bytes.len(),
                meta.dim
            )));
        }
        let n = bytes.len() / (8 * meta.dim);
        let values = bytes
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        let table = Array2::from_shape_vec((n, meta.dim), values).unwrap();
        if let Some((t, r)) = meta.rows.iter().find(|(_, r)| **r >= n) {
            return Err(Error::InvalidInput(format!("row {r} for {t:?} is past the end ({n} rows)")));
        }
        Ok(FileProvider { table, rows: meta.rows })
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }
}

impl EmbeddingProvider for FileProvider {
    fn dim(&self) -> usize {
        self.table.ncols()
    }

    fn embed(&self, text: &str) -> Result<Embedding> {
        let r = self.rows.get(text).ok_or_else(|| Error::UnknownTerm(text.to_string()))?;
        Ok(self.table.row(*r).to_owned())
    }
}

/// Writes a table readable by [`FileProvider::load`]; row `i` belongs to `terms[i]`.
pub fn write_embedding_file(bin: impl AsRef<Path>, sidecar: impl AsRef<Path>, terms: &[&str], table: ArrayView2<f64>) -> Result<()> {
    if terms.len() != table.nrows() {
        return Err(super::shape_err("embedding rows", terms.len(), table.nrows()));
    }
    let bytes: Vec<u8> = table.iter().flat_map(|v| v.to_le_bytes()).collect();
    fs::write(bin.as_ref(), bytes).map_err(|e| Error::io(bin.as_ref(), e))?;
    let meta = Sidecar {
        schema_version: crate::SCHEMA_VERSION,
        dim: table.ncols(),
        rows: terms.iter().enumerate().map(|(i, t)| (t.to_string(), i)).collect(),
    };
    crate::labels::write_json(sidecar.as_ref(), &meta)
}

fn unit(v: Array1<f64>) -> Array1<f64> {
    let n = v.dot(&v).sqrt();
    if n > 0.0 {
        v / n
    } else {
        v
    }
}

/// Embeds a prompt and scales it to unit length.
pub fn encode_prompt(text: &str, provider: &dyn EmbeddingProvider) -> Result<Embedding> {
    let v = provider.embed(text)?;
    if v.len() != provider.dim() {
        return Err(super::shape_err("embedding width", provider.dim(), v.len()));
    }
    if v.iter().any(|x| !x.is_finite()) {
        return Err(Error::InvalidInput(format!("embedding of {text:?} is not finite")));
    }
    Ok(unit(v))
}
