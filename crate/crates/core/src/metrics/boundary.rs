use serde::{Deserialize, Serialize};

use crate::distance::{squared_edt, UNREACHED};
use crate::error::Result;
use crate::morphology::{Connectivity, Neighborhood};
use crate::volume::{BinaryVolume, LabelVolume};

/// Precision, recall and their harmonic mean for boundary voxels.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundaryScores {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

impl BoundaryScores {
    /// Scores from hit counts. An empty reference set counts as fully
    /// matched (the ratio is vacuously 1).
    pub fn from_counts(gt_total: u64, gt_hit: u64, pred_total: u64, pred_hit: u64) -> Self {
        let ratio = |hit: u64, total: u64| if total == 0 { 1.0 } else { hit as f64 / total as f64 };
        let recall = ratio(gt_hit, gt_total);
        let precision = ratio(pred_hit, pred_total);
        let f1 = if precision + recall == 0.0 {
            0.0
        } else {
            2.0 * precision * recall / (precision + recall)
        };
        Self { precision, recall, f1 }
    }
}

/// Labeled voxels with at least one in-volume face neighbor carrying a
/// different value (background included).
pub fn extract_boundaries(labels: &LabelVolume) -> BinaryVolume {
    let dims = labels.dims();
    let data = labels.data();
    let nbhd = Neighborhood::new(dims, Connectivity::Face6);
    let out = (0..dims.len())
        .map(|i| {
            let l = data[i];
            if l == 0 {
                return false;
            }
            let mut edge = false;
            nbhd.for_each(i, |j| edge |= data[j] != l);
            edge
        })
        .collect();
    BinaryVolume::from_vec(dims, out).expect("same extent")
}

/// Boundary voxels of `of` that lie within `radius` of a boundary voxel of `to`.
pub(crate) fn hits(of: &BinaryVolume, to: &BinaryVolume, radius: f64) -> BinaryVolume {
    let d2 = squared_edt(to);
    let r2 = radius * radius;
    of.zip_map(&d2, |b, d| b && d != UNREACHED && d as f64 <= r2)
        .expect("same extent")
}

/// Boundary precision, recall and F1 with a match tolerance of `radius` voxels.
pub fn boundary_scores(gt: &LabelVolume, pred: &LabelVolume, radius: f64) -> Result<BoundaryScores> {
    gt.dims().ensure_same(&pred.dims())?;
    let gb = extract_boundaries(gt);
    let pb = extract_boundaries(pred);
    let gt_hit = hits(&gb, &pb, radius).count() as u64;
    let pred_hit = hits(&pb, &gb, radius).count() as u64;
    Ok(BoundaryScores::from_counts(
        gb.count() as u64,
        gt_hit,
        pb.count() as u64,
        pred_hit,
    ))
}
