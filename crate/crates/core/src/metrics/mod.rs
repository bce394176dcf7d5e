//! Instance, boundary, detection and depth-resolved segmentation scores.

mod boundary;
pub mod loss;

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::volume::{BinaryVolume, LabelVolume};

pub use boundary::{boundary_scores, extract_boundaries, BoundaryScores};
pub use loss::{weighted_bce_loss, weighted_bce_report, LossReport};

/// Default match tolerance for boundary voxels.
pub const BOUNDARY_RADIUS: f64 = 2.0;
/// Default half-width (in z-layers) of the depth-profile boundary window.
pub const DEPTH_WINDOW: usize = 5;

/// Dice coefficient corresponding to a Jaccard index: `2J / (1 + J)`.
pub fn dice_from_jaccard(j: f64) -> f64 {
    2.0 * j / (1.0 + j)
}

/// Instance sizes and pairwise intersections of two labelings.
struct Overlaps {
    gt_sizes: BTreeMap<u32, u64>,
    pred_sizes: BTreeMap<u32, u64>,
    /// For each GT label, `(pred label, intersection)` in ascending pred order.
    by_gt: BTreeMap<u32, Vec<(u32, u64)>>,
}

impl Overlaps {
    fn new(gt: &LabelVolume, pred: &LabelVolume) -> Self {
        let mut gt_sizes = BTreeMap::new();
        let mut pred_sizes = BTreeMap::new();
        let mut pairs: HashMap<(u32, u32), u64> = HashMap::new();
        for (&g, &p) in gt.data().iter().zip(pred.data()) {
            if g != 0 {
                *gt_sizes.entry(g).or_insert(0) += 1;
            }
            if p != 0 {
                *pred_sizes.entry(p).or_insert(0) += 1;
            }
            if g != 0 && p != 0 {
                *pairs.entry((g, p)).or_insert(0) += 1;
            }
        }
        let mut by_gt: BTreeMap<u32, Vec<(u32, u64)>> = BTreeMap::new();
        for ((g, p), n) in pairs {
            by_gt.entry(g).or_default().push((p, n));
        }
        for v in by_gt.values_mut() {
            v.sort_unstable();
        }
        Self {
            gt_sizes,
            pred_sizes,
            by_gt,
        }
    }

    /// Greedy aggregated Jaccard over the given GT labels (ascending).
    ///
    /// With `scoped`, only unselected predictions that intersect one of the
    /// listed GT instances are charged to the union; otherwise all are.
    fn aggregated_jaccard(&self, gts: &[u32], scoped: bool) -> f64 {
        let mut used = BTreeSet::new();
        let (mut c, mut u) = (0u64, 0u64);
        for g in gts {
            let g_size = self.gt_sizes[g];
            let mut best: Option<(u32, u64, u64)> = None;
            for &(p, inter) in self.by_gt.get(g).map(Vec::as_slice).unwrap_or(&[]) {
                if used.contains(&p) {
                    continue;
                }
                let union = g_size + self.pred_sizes[&p] - inter;
                // inter/union > best_inter/best_union, compared exactly.
                let better = match best {
                    None => true,
                    Some((_, bi, bu)) => (inter as u128) * (bu as u128) > (bi as u128) * (union as u128),
                };
                if better {
                    best = Some((p, inter, union));
                }
            }
            match best {
                Some((p, inter, union)) => {
                    used.insert(p);
                    c += inter;
                    u += union;
                }
                None => u += g_size,
            }
        }
        let charged: Box<dyn Iterator<Item = u32>> = if scoped {
            let touching: BTreeSet<u32> = gts
                .iter()
                .flat_map(|g| self.by_gt.get(g).into_iter().flatten().map(|&(p, _)| p))
                .collect();
            Box::new(touching.into_iter())
        } else {
            Box::new(self.pred_sizes.keys().copied())
        };
        for p in charged {
            if !used.contains(&p) {
                u += self.pred_sizes[&p];
            }
        }
        if u == 0 {
            // Only reachable when neither side has an instance.
            1.0
        } else {
            c as f64 / u as f64
        }
    }
}

/// Aggregated Jaccard index.
///
/// GT instances are visited in ascending label order; each takes the unused
/// prediction with the highest IoU (ties go to the smaller prediction label).
/// Unmatched GT instances and never-selected predictions enlarge the union.
pub fn aggregated_jaccard(gt: &LabelVolume, pred: &LabelVolume) -> Result<f64> {
    gt.dims().ensure_same(&pred.dims())?;
    let o = Overlaps::new(gt, pred);
    let gts: Vec<u32> = o.gt_sizes.keys().copied().collect();
    Ok(o.aggregated_jaccard(&gts, false))
}

/// Aggregated Dice, `2·AJI / (1 + AJI)`.
pub fn aggregated_dice(gt: &LabelVolume, pred: &LabelVolume) -> Result<f64> {
    Ok(dice_from_jaccard(aggregated_jaccard(gt, pred)?))
}

/// Jaccard and Dice of two plain masks.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MaskScores {
    pub jaccard: f64,
    pub dice: f64,
}

/// Set overlap of two binary masks. Two empty masks score 1.
pub fn mask_scores(a: &BinaryVolume, b: &BinaryVolume) -> Result<MaskScores> {
    a.dims().ensure_same(&b.dims())?;
    let (mut inter, mut union) = (0u64, 0u64);
    for (&x, &y) in a.data().iter().zip(b.data()) {
        inter += (x && y) as u64;
        union += (x || y) as u64;
    }
    let jaccard = if union == 0 { 1.0 } else { inter as f64 / union as f64 };
    Ok(MaskScores {
        jaccard,
        dice: dice_from_jaccard(jaccard),
    })
}

/// Scores of one z-layer.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LayerScore {
    pub z: usize,
    pub aji: f64,
    pub bf1: f64,
}

/// Depth-resolved scores.
///
/// For layer `z`, the AJI is computed over the full 3D extent of every GT
/// instance that appears in that layer; unselected predictions are charged
/// only when they intersect one of those instances. The boundary F1 counts
/// boundary voxels in layers `z - window ..= z + window` (clamped), with
/// matches searched in the whole volume. Layers without GT instances are
/// skipped.
pub fn depth_profiles(
    gt: &LabelVolume,
    pred: &LabelVolume,
    radius: f64,
    window: usize,
) -> Result<Vec<LayerScore>> {
    gt.dims().ensure_same(&pred.dims())?;
    let dims = gt.dims();
    let overlaps = Overlaps::new(gt, pred);

    let gb = extract_boundaries(gt);
    let pb = extract_boundaries(pred);
    let g_hit = boundary::hits(&gb, &pb, radius);
    let p_hit = boundary::hits(&pb, &gb, radius);

    // Per-layer counts: [gt boundary, gt hit, pred boundary, pred hit].
    let slice = dims.slice_len();
    let per_layer: Vec<[u64; 4]> = (0..dims.nz)
        .map(|z| {
            let r = z * slice..(z + 1) * slice;
            let count = |v: &BinaryVolume| v.data()[r.clone()].iter().filter(|&&b| b).count() as u64;
            [count(&gb), count(&g_hit), count(&pb), count(&p_hit)]
        })
        .collect();
    let mut prefix = vec![[0u64; 4]; dims.nz + 1];
    for z in 0..dims.nz {
        for k in 0..4 {
            prefix[z + 1][k] = prefix[z][k] + per_layer[z][k];
        }
    }

    let mut out = Vec::new();
    for z in 0..dims.nz {
        let mut present: Vec<u32> = gt.data()[z * slice..(z + 1) * slice]
            .iter()
            .copied()
            .filter(|&l| l != 0)
            .collect();
        present.sort_unstable();
        present.dedup();
        if present.is_empty() {
            continue;
        }
        let aji = overlaps.aggregated_jaccard(&present, true);
        let lo = z.saturating_sub(window);
        let hi = (z + window + 1).min(dims.nz);
        let w: Vec<u64> = (0..4).map(|k| prefix[hi][k] - prefix[lo][k]).collect();
        let bf1 = BoundaryScores::from_counts(w[0], w[1], w[2], w[3]).f1;
        out.push(LayerScore { z, aji, bf1 });
    }
    Ok(out)
}

/// Detection counts for predicted centroids.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CentroidStats {
    pub true_positives: u64,
    pub false_positives: u64,
    pub false_negatives: u64,
    pub jaccard: f64,
    pub dice: f64,
}

impl CentroidStats {
    pub fn from_counts(tp: u64, fp: u64, fn_: u64) -> Self {
        let denom_j = tp + fp + fn_;
        let denom_d = 2 * tp + fp + fn_;
        Self {
            true_positives: tp,
            false_positives: fp,
            false_negatives: fn_,
            jaccard: if denom_j == 0 { 1.0 } else { tp as f64 / denom_j as f64 },
            dice: if denom_d == 0 { 1.0 } else { 2.0 * tp as f64 / denom_d as f64 },
        }
    }
}

/// Scores predicted centroid components against GT instances.
///
/// Each component (ascending label) is reduced to the rounded mean of its
/// voxel coordinates. It is a true positive when that voxel lies in a GT
/// instance no earlier centroid has claimed.
pub fn centroid_detection(pred_centroids: &LabelVolume, gt: &LabelVolume) -> Result<CentroidStats> {
    gt.dims().ensure_same(&pred_centroids.dims())?;
    let dims = gt.dims();
    let mut sums: BTreeMap<u32, [f64; 4]> = BTreeMap::new();
    for (i, &l) in pred_centroids.data().iter().enumerate() {
        if l != 0 {
            let (x, y, z) = dims.coords(i);
            let s = sums.entry(l).or_insert([0.0; 4]);
            s[0] += x as f64;
            s[1] += y as f64;
            s[2] += z as f64;
            s[3] += 1.0;
        }
    }
    let mut detected = BTreeSet::new();
    let (mut tp, mut fp) = (0u64, 0u64);
    for s in sums.values() {
        let at = |k: usize| (s[k] / s[3]).round() as usize;
        let g = gt.get(at(0), at(1), at(2));
        if g != 0 && detected.insert(g) {
            tp += 1;
        } else {
            fp += 1;
        }
    }
    let fn_ = (gt.instance_count() - detected.len()) as u64;
    Ok(CentroidStats::from_counts(tp, fp, fn_))
}

/// Settings for [`evaluate`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvalOptions {
    pub boundary_radius: f64,
    pub depth_window: usize,
}

impl Default for EvalOptions {
    fn default() -> Self {
        Self {
            boundary_radius: BOUNDARY_RADIUS,
            depth_window: DEPTH_WINDOW,
        }
    }
}

/// Everything computed for one GT/prediction pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub aji: f64,
    pub adsc: f64,
    pub boundary_precision: f64,
    pub boundary_recall: f64,
    pub boundary_f1: f64,
    pub boundary_radius: f64,
    pub depth_window: usize,
    pub gt_instances: usize,
    pub pred_instances: usize,
    pub per_layer: Vec<LayerScore>,
    /// Detection-count Jaccard/Dice of predicted centroids, if supplied.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub centroid_stats: Option<CentroidStats>,
    /// Plain mask Jaccard/Dice of a predicted background mask against GT
    /// background, if supplied.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub background_mask: Option<MaskScores>,
}

/// Computes the instance, boundary and depth scores of `pred` against `gt`.
pub fn evaluate(gt: &LabelVolume, pred: &LabelVolume, opts: &EvalOptions) -> Result<EvaluationReport> {
    let aji = aggregated_jaccard(gt, pred)?;
    let b = boundary_scores(gt, pred, opts.boundary_radius)?;
    Ok(EvaluationReport {
        aji,
        adsc: dice_from_jaccard(aji),
        boundary_precision: b.precision,
        boundary_recall: b.recall,
        boundary_f1: b.f1,
        boundary_radius: opts.boundary_radius,
        depth_window: opts.depth_window,
        gt_instances: gt.instance_count(),
        pred_instances: pred.instance_count(),
        per_layer: depth_profiles(gt, pred, opts.boundary_radius, opts.depth_window)?,
        centroid_stats: None,
        background_mask: None,
    })
}

impl EvaluationReport {
    pub fn write_json(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let text = serde_json::to_string_pretty(self)?;
        std::fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
    }

    /// Writes the per-layer table as `z,aji,bf1`.
    pub fn write_layers_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut w = csv::Writer::from_path(path)?;
        for row in &self.per_layer {
            w.serialize(row)?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }
}
