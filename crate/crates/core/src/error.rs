use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("json error in {context}: {source}")]
    Json {
        context: String,
        #[source]
        source: serde_json::Error,
    },

    #[error("malformed NIfTI header: {0}")]
    MalformedHeader(String),

    #[error("unsupported NIfTI datatype code {0}")]
    UnsupportedDatatype(i16),

    #[error("unsupported dimensionality: {0}")]
    DimensionError(String),

    #[error("affine is singular")]
    SingularAffine,

    #[error("invalid axcodes {0:?}")]
    InvalidAxcodes(String),

    #[error("resampling produces an empty grid {0:?}")]
    DegenerateOutput([usize; 3]),

    #[error("volume has no nonzero voxel")]
    AllZeroVolume,

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("label code {0} has no class map entry")]
    UnmappedCode(u16),

    #[error("merge rules contain a cycle through {0}")]
    CycleDetected(String),

    #[error("unknown terminology {0:?}")]
    UnknownTerminology(String),

    #[error("dataset {0:?} has no cases")]
    EmptyDataset(String),

    #[error("contrastive batch needs at least 2 rows, got {0}")]
    BatchTooSmall(usize),

    #[error("target is not binary: found {0}")]
    InvalidTarget(f64),

    #[error("mask is empty")]
    EmptyMask,

    #[error("embedding provider has no entry for {0:?}")]
    UnknownTerm(String),

    #[error("missing artifact {path}; run `{hint}` first")]
    MissingArtifact { path: PathBuf, hint: String },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn json(context: impl Into<String>, source: serde_json::Error) -> Self {
        Error::Json {
            context: context.into(),
            source,
        }
    }
}
