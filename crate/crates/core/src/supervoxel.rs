//! Supervoxel region adjacency graphs and greedy merging by boundary
//! probability.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BinaryHeap, HashMap};

use crate::error::{Error, Result};
use crate::volume::{LabelVolume, ScalarVolume};

/// Accumulated statistics of the shared boundary between two regions.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct EdgeStats {
    /// Sum over boundary face pairs of the mean probability of the two voxels.
    pub prob_sum: f64,
    /// Number of boundary face pairs.
    pub face_count: u64,
}

impl EdgeStats {
    pub fn average(&self) -> f64 {
        self.prob_sum / self.face_count as f64
    }

    fn absorb(&mut self, other: EdgeStats) {
        self.prob_sum += other.prob_sum;
        self.face_count += other.face_count;
    }
}

/// Regions with voxel counts and boundary statistics between adjacent pairs.
///
/// Edge keys are stored as `(smaller label, larger label)`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct RegionAdjacencyGraph {
    nodes: BTreeMap<u32, u64>,
    edges: BTreeMap<(u32, u32), EdgeStats>,
}

impl RegionAdjacencyGraph {
    /// Assembles a graph from explicit parts, checking that every edge joins
    /// two distinct known nodes and has at least one face.
    pub fn from_parts(
        nodes: BTreeMap<u32, u64>,
        edges: BTreeMap<(u32, u32), EdgeStats>,
    ) -> Result<Self> {
        for (&(a, b), st) in &edges {
            if a >= b || !nodes.contains_key(&a) || !nodes.contains_key(&b) || st.face_count == 0 {
                return Err(Error::InvalidParameter {
                    name: "edge",
                    reason: format!("({a}, {b}) is not a valid edge"),
                });
            }
        }
        Ok(Self { nodes, edges })
    }

    pub fn nodes(&self) -> &BTreeMap<u32, u64> {
        &self.nodes
    }

    pub fn edges(&self) -> &BTreeMap<(u32, u32), EdgeStats> {
        &self.edges
    }

    pub fn edge(&self, a: u32, b: u32) -> Option<&EdgeStats> {
        self.edges.get(&(a.min(b), a.max(b)))
    }

    /// Collapses nodes according to `mapping`, summing sizes and parallel
    /// edge statistics. Edges that fall inside one merged node vanish.
    pub fn contract(&self, mapping: &LabelMapping) -> Result<Self> {
        let mut nodes = BTreeMap::new();
        for (&l, &size) in &self.nodes {
            *nodes.entry(mapping.get(l)?).or_insert(0) += size;
        }
        let mut edges: BTreeMap<(u32, u32), EdgeStats> = BTreeMap::new();
        for (&(a, b), &st) in &self.edges {
            let (ma, mb) = (mapping.get(a)?, mapping.get(b)?);
            if ma != mb {
                edges.entry((ma.min(mb), ma.max(mb))).or_default().absorb(st);
            }
        }
        Ok(Self { nodes, edges })
    }
}

/// Builds the adjacency graph of a total labeling over face-adjacent voxel
/// pairs. Each pair with different labels contributes the mean of the two
/// voxels' probabilities.
pub fn build_rag(supervoxels: &LabelVolume, membrane_prob: &ScalarVolume) -> Result<RegionAdjacencyGraph> {
    let dims = supervoxels.dims();
    dims.ensure_same(&membrane_prob.dims())?;
    let labels = supervoxels.data();
    if labels.contains(&0) {
        return Err(Error::UnlabeledVoxels);
    }
    let prob = membrane_prob.data();
    let strides = [1, dims.nx, dims.slice_len()];

    let mut nodes = BTreeMap::new();
    let mut edges: HashMap<(u32, u32), EdgeStats> = HashMap::new();
    for i in 0..labels.len() {
        let (x, y, z) = dims.coords(i);
        let inside = [x + 1 < dims.nx, y + 1 < dims.ny, z + 1 < dims.nz];
        let a = labels[i];
        *nodes.entry(a).or_insert(0u64) += 1;
        for axis in 0..3 {
            if !inside[axis] {
                continue;
            }
            let j = i + strides[axis];
            let b = labels[j];
            if a != b {
                let st = edges.entry((a.min(b), a.max(b))).or_default();
                st.prob_sum += (prob[i] as f64 + prob[j] as f64) / 2.0;
                st.face_count += 1;
            }
        }
    }
    Ok(RegionAdjacencyGraph {
        nodes,
        edges: edges.into_iter().collect(),
    })
}

/// Total relabeling from supervoxel ids to merged region ids.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct LabelMapping(BTreeMap<u32, u32>);

impl LabelMapping {
    pub fn new(map: BTreeMap<u32, u32>) -> Self {
        Self(map)
    }

    pub fn identity(labels: impl IntoIterator<Item = u32>) -> Self {
        Self(labels.into_iter().map(|l| (l, l)).collect())
    }

    pub fn get(&self, label: u32) -> Result<u32> {
        self.0.get(&label).copied().ok_or(Error::MissingLabel(label))
    }

    pub fn as_map(&self) -> &BTreeMap<u32, u32> {
        &self.0
    }

    /// Number of distinct target labels.
    pub fn target_count(&self) -> usize {
        let mut t: Vec<u32> = self.0.values().copied().collect();
        t.sort_unstable();
        t.dedup();
        t.len()
    }
}

/// One merge step: `absorbed` joined `kept` across an edge of this average.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Merge {
    pub kept: u32,
    pub absorbed: u32,
    pub average: f64,
}

/// Result of greedy merging.
#[derive(Debug, Clone)]
pub struct Agglomeration {
    pub mapping: LabelMapping,
    pub merges: Vec<Merge>,
    /// Graph of the merged regions.
    pub graph: RegionAdjacencyGraph,
}

#[derive(Debug, Clone, Copy)]
struct Candidate {
    average: f64,
    a: u32,
    b: u32,
    version_a: u64,
    version_b: u64,
}

impl Candidate {
    fn key(&self) -> (f64, u32, u32) {
        (self.average, self.a, self.b)
    }
}

impl Ord for Candidate {
    fn cmp(&self, other: &Self) -> Ordering {
        let (x, y) = (self.key(), other.key());
        // Reversed: BinaryHeap pops the maximum.
        y.0.total_cmp(&x.0)
            .then(y.1.cmp(&x.1))
            .then(y.2.cmp(&x.2))
            .then(other.version_a.cmp(&self.version_a))
            .then(other.version_b.cmp(&self.version_b))
    }
}

impl PartialOrd for Candidate {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl PartialEq for Candidate {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Candidate {}

/// Repeatedly merges the pair joined by the lowest-average edge while that
/// average is below `threshold`.
///
/// Ties are resolved by the smaller `(min label, max label)` pair. A merged
/// region keeps the smaller of the two labels. Stale queue entries are
/// detected by per-region version counters and skipped.
pub fn agglomerate(rag: &RegionAdjacencyGraph, threshold: f64) -> Agglomeration {
    let mut adjacency: HashMap<u32, BTreeMap<u32, EdgeStats>> =
        rag.nodes.keys().map(|&l| (l, BTreeMap::new())).collect();
    for (&(a, b), &st) in &rag.edges {
        adjacency.get_mut(&a).unwrap().insert(b, st);
        adjacency.get_mut(&b).unwrap().insert(a, st);
    }
    let mut sizes = rag.nodes.clone();
    let mut version: HashMap<u32, u64> = rag.nodes.keys().map(|&l| (l, 0)).collect();
    let mut parent: BTreeMap<u32, u32> = rag.nodes.keys().map(|&l| (l, l)).collect();

    let mut heap: BinaryHeap<Candidate> = rag
        .edges
        .iter()
        .map(|(&(a, b), st)| Candidate {
            average: st.average(),
            a,
            b,
            version_a: 0,
            version_b: 0,
        })
        .collect();

    let mut merges = Vec::new();
    while let Some(c) = heap.pop() {
        let fresh = version.get(&c.a) == Some(&c.version_a) && version.get(&c.b) == Some(&c.version_b);
        if !fresh {
            continue;
        }
        if c.average >= threshold {
            break;
        }
        let (kept, gone) = (c.a, c.b);
        let gone_edges = adjacency.remove(&gone).unwrap();
        version.remove(&gone);
        for (n, st) in gone_edges {
            if n == kept {
                continue;
            }
            let row = adjacency.get_mut(&n).unwrap();
            row.remove(&gone);
            row.entry(kept).or_default().absorb(st);
            adjacency.get_mut(&kept).unwrap().entry(n).or_default().absorb(st);
        }
        adjacency.get_mut(&kept).unwrap().remove(&gone);
        let gone_size = sizes.remove(&gone).unwrap();
        *sizes.get_mut(&kept).unwrap() += gone_size;
        parent.insert(gone, kept);
        *version.get_mut(&kept).unwrap() += 1;
        merges.push(Merge {
            kept,
            absorbed: gone,
            average: c.average,
        });

        for (&n, st) in &adjacency[&kept] {
            let (a, b) = (kept.min(n), kept.max(n));
            heap.push(Candidate {
                average: st.average(),
                a,
                b,
                version_a: version[&a],
                version_b: version[&b],
            });
        }
    }

    let find = |mut l: u32| {
        while parent[&l] != l {
            l = parent[&l];
        }
        l
    };
    let mapping = LabelMapping(rag.nodes.keys().map(|&l| (l, find(l))).collect());

    let mut edges = BTreeMap::new();
    for (&a, row) in &adjacency {
        for (&b, &st) in row {
            if a < b {
                edges.insert((a, b), st);
            }
        }
    }
    Agglomeration {
        mapping,
        merges,
        graph: RegionAdjacencyGraph { nodes: sizes, edges },
    }
}

/// Mapping produced by [`agglomerate`].
pub fn merge_supervoxels(rag: &RegionAdjacencyGraph, threshold: f64) -> LabelMapping {
    agglomerate(rag, threshold).mapping
}

/// Relabels every voxel through `mapping`. Background (0) stays 0.
pub fn apply_mapping(supervoxels: &LabelVolume, mapping: &LabelMapping) -> Result<LabelVolume> {
    let max = supervoxels.max_label() as usize;
    let mut out = Vec::with_capacity(supervoxels.dims().len());
    if max <= 4 * supervoxels.dims().len() + 16 {
        let mut table: Vec<Option<u32>> = vec![None; max + 1];
        table[0] = Some(0);
        for (&k, &v) in mapping.as_map() {
            if (k as usize) <= max {
                table[k as usize] = Some(v);
            }
        }
        for &l in supervoxels.data() {
            out.push(table[l as usize].ok_or(Error::MissingLabel(l))?);
        }
    } else {
        for &l in supervoxels.data() {
            out.push(if l == 0 { 0 } else { mapping.get(l)? });
        }
    }
    LabelVolume::from_vec(supervoxels.dims(), out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::volume::Dims;

    fn graph(nodes: &[(u32, u64)], edges: &[((u32, u32), f64, u64)]) -> RegionAdjacencyGraph {
        RegionAdjacencyGraph::from_parts(
            nodes.iter().copied().collect(),
            edges
                .iter()
                .map(|&(k, avg, f)| {
                    (
                        k,
                        EdgeStats {
                            prob_sum: avg * f as f64,
                            face_count: f,
                        },
                    )
                })
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn plane_interface() {
        let d = Dims::cube(4).unwrap();
        let sv = LabelVolume::from_fn(d, |x, _, _| if x < 2 { 1 } else { 2 });
        let prob = ScalarVolume::filled(d, 0.8);
        let rag = build_rag(&sv, &prob).unwrap();
        assert_eq!(rag.edges().len(), 1);
        let e = rag.edge(1, 2).unwrap();
        assert_eq!(e.face_count, 16);
        assert!((e.average() - 0.8).abs() < 1e-6);
        assert_eq!(rag.nodes()[&1], 32);
    }

    #[test]
    fn pair_mean() {
        let d = Dims::new(2, 1, 1).unwrap();
        let sv = LabelVolume::from_vec(d, vec![4, 9]).unwrap();
        let prob = ScalarVolume::from_vec(d, vec![0.25, 0.75]).unwrap();
        let rag = build_rag(&sv, &prob).unwrap();
        assert_eq!(rag.edge(9, 4).unwrap().average(), 0.5);

        let one = LabelVolume::filled(Dims::cube(3).unwrap(), 1);
        let rag = build_rag(&one, &ScalarVolume::filled(one.dims(), 0.5)).unwrap();
        assert!(rag.edges().is_empty());
    }

    #[test]
    fn rag_requires_total_labeling() {
        let d = Dims::new(2, 1, 1).unwrap();
        let sv = LabelVolume::from_vec(d, vec![0, 1]).unwrap();
        assert!(matches!(
            build_rag(&sv, &ScalarVolume::filled(d, 0.0)),
            Err(Error::UnlabeledVoxels)
        ));
    }

    #[test]
    fn merges_weak_edge() {
        let g = graph(&[(1, 5), (2, 5)], &[((1, 2), 0.3, 4)]);
        let m = merge_supervoxels(&g, 0.5);
        assert_eq!(m.get(2).unwrap(), 1);
        assert_eq!(m.target_count(), 1);

        let strong = graph(&[(1, 5), (2, 5)], &[((1, 2), 0.5, 4)]);
        assert_eq!(merge_supervoxels(&strong, 0.5), LabelMapping::identity([1, 2]));
    }

    #[test]
    fn triangle_stops_after_first_merge() {
        let g = graph(
            &[(1, 3), (2, 3), (3, 3)],
            &[((1, 2), 0.2, 2), ((2, 3), 0.6, 3), ((1, 3), 0.6, 5)],
        );
        let agg = agglomerate(&g, 0.5);
        assert_eq!(agg.merges.len(), 1);
        assert_eq!(agg.mapping.as_map().values().copied().collect::<Vec<_>>(), vec![1, 1, 3]);
        let e = agg.graph.edge(1, 3).unwrap();
        assert_eq!(e.face_count, 8);
        assert!((e.average() - 0.6).abs() < 1e-12);
        assert_eq!(agg.graph.nodes()[&1], 6);
    }

    #[test]
    fn equal_averages_break_ties_by_label_pair() {
        let g = graph(
            &[(1, 1), (2, 1), (3, 1), (4, 1)],
            &[((3, 4), 0.1, 1), ((1, 2), 0.1, 1), ((2, 3), 0.9, 1)],
        );
        let agg = agglomerate(&g, 0.5);
        assert_eq!(agg.merges[0].kept, 1);
        assert_eq!(agg.merges[1].kept, 3);
    }

    #[test]
    fn mapping_application() {
        let d = Dims::new(3, 1, 1).unwrap();
        let v = LabelVolume::from_vec(d, vec![1, 2, 3]).unwrap();
        assert_eq!(apply_mapping(&v, &LabelMapping::identity([1, 2, 3])).unwrap(), v);
        let all_one = LabelMapping::new([(1, 1), (2, 1), (3, 1)].into_iter().collect());
        assert_eq!(apply_mapping(&v, &all_one).unwrap().data(), &[1, 1, 1]);
        let partial = LabelMapping::identity([1, 2]);
        assert!(matches!(apply_mapping(&v, &partial), Err(Error::MissingLabel(3))));
    }
}
