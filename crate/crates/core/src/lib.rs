//! Watershed-based 3D cell instance segmentation from 3-class probability
//! volumes (cell centroid, membrane, background), with the matching
//! evaluation metrics and a synthetic specimen generator.
//!
//! Volumes are stored x-fastest: `index = x + nx·(y + ny·z)`.

pub mod cli;
pub mod distance;
pub mod error;
pub mod metrics;
pub mod morphology;
pub mod phantom;
pub mod pipeline;
pub mod supervoxel;
pub mod volume;
pub mod watershed;

pub use error::{Error, Result};
