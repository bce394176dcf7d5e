use std::path::PathBuf;

use crate::volume::Dims;

/// Errors produced anywhere in the segmentation and evaluation stack.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid dimensions {nx}x{ny}x{nz}")]
    InvalidDims { nx: usize, ny: usize, nz: usize },

    #[error("data length {actual} does not match dims (expected {expected})")]
    LengthMismatch { expected: usize, actual: usize },

    #[error("dimension mismatch: {left} vs {right}")]
    DimsMismatch { left: Dims, right: Dims },

    #[error("non-finite value at index {index}")]
    NonFinite { index: usize },

    #[error("{name}: value {value} at index {index} is outside [0, 1]")]
    NotAProbability {
        name: &'static str,
        index: usize,
        value: f32,
    },

    #[error("structuring element diameter must be odd and positive, got {0}")]
    InvalidDiameter(i64),

    #[error("invalid parameter {name}: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("no markers: {0}")]
    NoMarkers(&'static str),

    #[error("no seeds found after centroid thresholding, closing and membrane subtraction")]
    NoSeeds,

    #[error("volume contains unlabeled voxels")]
    UnlabeledVoxels,

    #[error("label {0} is missing from the mapping")]
    MissingLabel(u32),

    #[error("class '{class}' has no {which} voxels, weight is undefined")]
    DegenerateClass { class: String, which: &'static str },

    #[error("class '{class}': ground truth value {value} is not 0 or 1")]
    NonBinaryTruth { class: String, value: f32 },

    #[error("could not place {n_cells} seeds within {attempts} attempts")]
    SeedsUnplaceable { n_cells: usize, attempts: usize },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed NRRD header: {0}")]
    MalformedHeader(String),

    #[error("unsupported dimension {0}")]
    UnsupportedDimension(usize),

    #[error("unsupported {field}: {value}")]
    Unsupported { field: &'static str, value: String },

    #[error("expected {expected} volume, found {found}")]
    WrongKind {
        expected: &'static str,
        found: &'static str,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
