//! Priority-flood watershed engines.
//!
//! All variants share one flooding core: marker voxels enter a global min
//! priority queue at their landscape value; each pop labels every unlabeled
//! neighbor and queues it at `max(neighbor value, popped priority)`. Equal
//! priorities leave the queue in insertion order, so results do not depend
//! on heap internals or thread count. No watershed-line voxels are produced.

use std::cmp::Ordering;
use std::collections::{BinaryHeap, HashMap};

use crate::error::{Error, Result};
use crate::morphology::{connected_components, Connectivity, Neighborhood};
use crate::volume::{BinaryVolume, LabelVolume, ScalarVolume};

/// Queue key: landscape priority first, then insertion counter.
#[derive(Debug, Clone, Copy)]
pub struct FloodOrder {
    pub priority: f32,
    pub tiebreak: u64,
}

impl Ord for FloodOrder {
    fn cmp(&self, other: &Self) -> Ordering {
        self.priority
            .total_cmp(&other.priority)
            .then(self.tiebreak.cmp(&other.tiebreak))
    }
}

impl PartialOrd for FloodOrder {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl PartialEq for FloodOrder {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for FloodOrder {}

#[derive(PartialEq, Eq)]
struct Entry {
    order: FloodOrder,
    index: u32,
}

impl Ord for Entry {
    fn cmp(&self, other: &Self) -> Ordering {
        // BinaryHeap is a max-heap.
        other.order.cmp(&self.order)
    }
}

impl PartialOrd for Entry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

fn flood(
    landscape: &ScalarVolume,
    markers: &LabelVolume,
    conn: Connectivity,
    mut trace: Option<&mut Vec<f32>>,
) -> Result<LabelVolume> {
    let dims = landscape.dims();
    dims.ensure_same(&markers.dims())?;
    let values = landscape.data();
    let mut labels = markers.data().to_vec();
    if labels.iter().all(|&l| l == 0) {
        return Err(Error::NoMarkers("marker volume has no nonzero voxel"));
    }
    let nbhd = Neighborhood::new(dims, conn);
    let mut heap = BinaryHeap::new();
    let mut counter = 0u64;

    for i in 0..labels.len() {
        if labels[i] == 0 {
            continue;
        }
        // Markers whose neighbors are all labeled would never label
        // anything; leaving them out does not change the result.
        let mut frontier = false;
        nbhd.for_each(i, |j| frontier |= labels[j] == 0);
        if frontier {
            heap.push(Entry {
                order: FloodOrder {
                    priority: values[i],
                    tiebreak: counter,
                },
                index: i as u32,
            });
            counter += 1;
        }
    }

    while let Some(Entry { order, index }) = heap.pop() {
        if let Some(t) = trace.as_deref_mut() {
            t.push(order.priority);
        }
        let label = labels[index as usize];
        nbhd.for_each(index as usize, |j| {
            if labels[j] == 0 {
                labels[j] = label;
                heap.push(Entry {
                    order: FloodOrder {
                        priority: values[j].max(order.priority),
                        tiebreak: counter,
                    },
                    index: j as u32,
                });
                counter += 1;
            }
        });
    }
    LabelVolume::from_vec(dims, labels)
}

/// Floods `landscape` from the nonzero voxels of `markers`.
///
/// Every voxel reachable from a marker under `conn` receives a label, and
/// marker voxels keep theirs.
pub fn seeded_watershed(
    landscape: &ScalarVolume,
    markers: &LabelVolume,
    conn: Connectivity,
) -> Result<LabelVolume> {
    flood(landscape, markers, conn, None)
}

/// Same as [`seeded_watershed`], also returning the priority of every pop in
/// order. Useful for checking that flooding never goes back down.
pub fn seeded_watershed_traced(
    landscape: &ScalarVolume,
    markers: &LabelVolume,
    conn: Connectivity,
) -> Result<(LabelVolume, Vec<f32>)> {
    let mut trace = Vec::new();
    let labels = flood(landscape, markers, conn, Some(&mut trace))?;
    Ok((labels, trace))
}

/// Labels every regional-minimum plateau of the landscape.
///
/// A plateau (maximal `conn`-connected set of equal values) is a regional
/// minimum when no neighbor outside it has a smaller value. Labels follow the
/// smallest flat index of each plateau.
pub fn local_minima_markers(landscape: &ScalarVolume, conn: Connectivity) -> LabelVolume {
    let dims = landscape.dims();
    let values = landscape.data();
    let nbhd = Neighborhood::new(dims, conn);
    let mut labels = vec![0u32; dims.len()];
    let mut visited = vec![false; dims.len()];
    let mut plateau = Vec::new();
    let mut stack = Vec::new();
    let mut next = 0u32;

    for start in 0..dims.len() {
        if visited[start] {
            continue;
        }
        let level = values[start];
        let mut is_minimum = true;
        plateau.clear();
        visited[start] = true;
        stack.push(start);
        while let Some(i) = stack.pop() {
            plateau.push(i);
            nbhd.for_each(i, |j| {
                let v = values[j];
                if v == level {
                    if !visited[j] {
                        visited[j] = true;
                        stack.push(j);
                    }
                } else if v < level {
                    is_minimum = false;
                }
            });
        }
        if is_minimum {
            next += 1;
            for &i in &plateau {
                labels[i] = next;
            }
        }
    }
    LabelVolume::from_vec(dims, labels).expect("same extent")
}

/// Baseline watershed: every connected component strictly below `t` is a
/// marker, and the probability map itself is flooded.
pub fn marker_watershed(prob: &ScalarVolume, t: f32, conn: Connectivity) -> Result<LabelVolume> {
    let markers = connected_components(&prob.below(t), conn);
    if markers.data().iter().all(|&l| l == 0) {
        return Err(Error::NoMarkers("no voxel below the marker threshold"));
    }
    seeded_watershed(prob, &markers, conn)
}

/// Per-label voxel counts, dense when labels are compact.
pub(crate) struct LabelTally {
    dense: Vec<[u64; 2]>,
    sparse: HashMap<u32, [u64; 2]>,
}

impl LabelTally {
    pub(crate) fn new(labels: &LabelVolume) -> Self {
        let max = labels.max_label() as usize;
        let dense_ok = max <= 4 * labels.dims().len() + 16;
        Self {
            dense: if dense_ok { vec![[0; 2]; max + 1] } else { Vec::new() },
            sparse: HashMap::new(),
        }
    }

    #[inline]
    pub(crate) fn slot(&mut self, label: u32) -> &mut [u64; 2] {
        if self.dense.is_empty() {
            self.sparse.entry(label).or_insert([0; 2])
        } else {
            &mut self.dense[label as usize]
        }
    }

    pub(crate) fn get(&self, label: u32) -> [u64; 2] {
        if self.dense.is_empty() {
            self.sparse.get(&label).copied().unwrap_or([0; 2])
        } else {
            self.dense[label as usize]
        }
    }
}

/// Zeroes every label whose overlap with `background` exceeds `frac` of its
/// size. "Exceeds" is strict: exactly half is kept at `frac = 0.5`.
pub fn reject_background_segments(
    labels: &LabelVolume,
    background: &BinaryVolume,
    frac: f64,
) -> Result<LabelVolume> {
    labels.dims().ensure_same(&background.dims())?;
    if !(0.0..=1.0).contains(&frac) {
        return Err(Error::InvalidParameter {
            name: "background_reject_frac",
            reason: format!("{frac} is outside [0, 1]"),
        });
    }
    let mut tally = LabelTally::new(labels);
    for (&l, &bg) in labels.data().iter().zip(background.data()) {
        if l != 0 {
            let s = tally.slot(l);
            s[0] += 1;
            s[1] += bg as u64;
        }
    }
    let rejected = |l: u32| {
        let [size, overlap] = tally.get(l);
        overlap as f64 > frac * size as f64
    };
    Ok(labels.map(|l| if l != 0 && rejected(l) { 0 } else { l }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::volume::Dims;

    fn line(values: &[f32]) -> ScalarVolume {
        ScalarVolume::from_vec(Dims::new(values.len(), 1, 1).unwrap(), values.to_vec()).unwrap()
    }

    #[test]
    fn single_marker_floods_everything() {
        let d = Dims::cube(6).unwrap();
        let land = ScalarVolume::filled(d, 0.3);
        let mut markers = LabelVolume::filled(d, 0);
        markers.set(2, 3, 4, 7);
        let out = seeded_watershed(&land, &markers, Connectivity::Face6).unwrap();
        assert!(out.data().iter().all(|&l| l == 7));
    }

    #[test]
    fn ridge_voxel_goes_to_first_flooded_side() {
        let land = line(&[0.0, 1.0, 0.0]);
        let markers = LabelVolume::from_vec(land.dims(), vec![1, 0, 2]).unwrap();
        let out = seeded_watershed(&land, &markers, Connectivity::Face6).unwrap();
        assert_eq!(out.data(), &[1, 1, 2]);
    }

    #[test]
    fn splits_at_ridge() {
        let land = line(&[0.0, 0.1, 0.2, 0.9, 0.3, 0.1, 0.0]);
        let markers = LabelVolume::from_vec(land.dims(), vec![1, 0, 0, 0, 0, 0, 2]).unwrap();
        let out = seeded_watershed(&land, &markers, Connectivity::Face6).unwrap();
        // The ridge voxel is claimed by the side that reaches it at the lower
        // level (0.2 on the left against 0.3 on the right).
        assert_eq!(out.data(), &[1, 1, 1, 1, 2, 2, 2]);
    }

    #[test]
    fn errors_without_markers() {
        let land = line(&[0.0, 1.0]);
        let markers = LabelVolume::filled(land.dims(), 0);
        assert!(matches!(
            seeded_watershed(&land, &markers, Connectivity::Face6),
            Err(Error::NoMarkers(_))
        ));
        assert!(matches!(
            marker_watershed(&line(&[0.7, 0.9]), 0.5, Connectivity::Face6),
            Err(Error::NoMarkers(_))
        ));
    }

    #[test]
    fn bowl_has_single_minimum() {
        let d = Dims::cube(7).unwrap();
        let bowl = ScalarVolume::from_fn(d, |x, y, z| {
            let (a, b, c) = (x as f32 - 3.0, y as f32 - 3.0, z as f32 - 3.0);
            a * a + b * b + c * c
        });
        let m = local_minima_markers(&bowl, Connectivity::Face6);
        assert_eq!(m.instance_count(), 1);
        assert_eq!(m.get(3, 3, 3), 1);
        assert_eq!(m.foreground().count(), 1);

        let flat = ScalarVolume::filled(d, 0.25);
        let m = local_minima_markers(&flat, Connectivity::Vertex26);
        assert!(m.data().iter().all(|&l| l == 1));
    }

    #[test]
    fn two_bowls_two_minima() {
        let d = Dims::new(8, 5, 5).unwrap();
        let land = ScalarVolume::from_fn(d, |x, y, z| {
            let b = (y as f32 - 2.0).powi(2) + (z as f32 - 2.0).powi(2);
            let a = (x as f32 - 1.0).powi(2).min((x as f32 - 6.0).powi(2));
            a + b
        });
        assert_eq!(local_minima_markers(&land, Connectivity::Face6).instance_count(), 2);
    }

    #[test]
    fn marker_watershed_uniform_low_map() {
        let prob = ScalarVolume::filled(Dims::cube(5).unwrap(), 0.2);
        let out = marker_watershed(&prob, 0.5, Connectivity::Face6).unwrap();
        assert!(out.data().iter().all(|&l| l == 1));
    }

    #[test]
    fn marker_watershed_splits_at_sheet() {
        let d = Dims::cube(9).unwrap();
        let prob = ScalarVolume::from_fn(d, |x, _, _| if x == 4 { 0.9 } else { 0.1 });
        let out = marker_watershed(&prob, 0.5, Connectivity::Face6).unwrap();
        assert_eq!(out.instance_count(), 2);
        let markers = connected_components(&prob.below(0.5), Connectivity::Face6);
        assert_eq!(out, seeded_watershed(&prob, &markers, Connectivity::Face6).unwrap());
        assert_ne!(out.get(0, 0, 0), out.get(8, 0, 0));
    }

    #[test]
    fn background_rejection_is_strict() {
        let d = Dims::new(10, 1, 1).unwrap();
        let labels = LabelVolume::filled(d, 3);
        let six = BinaryVolume::from_fn(d, |x, _, _| x < 6);
        let five = BinaryVolume::from_fn(d, |x, _, _| x < 5);
        assert_eq!(reject_background_segments(&labels, &six, 0.5).unwrap().max_label(), 0);
        assert_eq!(reject_background_segments(&labels, &five, 0.5).unwrap(), labels);
        let none = BinaryVolume::filled(d, false);
        assert_eq!(reject_background_segments(&labels, &none, 0.5).unwrap(), labels);
        let all = BinaryVolume::filled(d, true);
        assert_eq!(reject_background_segments(&labels, &all, 0.5).unwrap().max_label(), 0);
    }

    #[test]
    fn sparse_huge_labels_are_tallied() {
        let d = Dims::new(4, 1, 1).unwrap();
        let labels = LabelVolume::from_vec(d, vec![u32::MAX, u32::MAX, 5, 0]).unwrap();
        let bg = BinaryVolume::from_vec(d, vec![true, true, false, true]).unwrap();
        let out = reject_background_segments(&labels, &bg, 0.5).unwrap();
        assert_eq!(out.data(), &[0, 0, 5, 0]);
    }
}
