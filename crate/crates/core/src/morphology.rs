//! Binary morphology and connected-component labeling.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::volume::{BinaryVolume, Dims, LabelVolume};

/// Voxel adjacency used for components, flooding and boundaries.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, clap::ValueEnum)]
pub enum Connectivity {
    /// Shared faces only.
    #[serde(rename = "face6")]
    #[value(name = "face6")]
    Face6,
    /// Shared faces, edges and corners.
    #[serde(rename = "vertex26")]
    #[value(name = "vertex26")]
    Vertex26,
}

const FACE6: [[i32; 3]; 6] = [
    [0, 0, -1],
    [0, -1, 0],
    [-1, 0, 0],
    [1, 0, 0],
    [0, 1, 0],
    [0, 0, 1],
];

impl Connectivity {
    /// Neighbor offsets in ascending flat-index order (excluding the origin).
    pub fn offsets(self) -> Vec<[i32; 3]> {
        match self {
            Connectivity::Face6 => FACE6.to_vec(),
            Connectivity::Vertex26 => {
                let mut v = Vec::with_capacity(26);
                for dz in -1..=1 {
                    for dy in -1..=1 {
                        for dx in -1..=1 {
                            if (dx, dy, dz) != (0, 0, 0) {
                                v.push([dx, dy, dz]);
                            }
                        }
                    }
                }
                v
            }
        }
    }
}

/// Precomputed neighbor offsets for fast traversal of one volume extent.
pub(crate) struct Neighborhood {
    dims: Dims,
    offsets: Vec<([i32; 3], isize)>,
}

impl Neighborhood {
    pub(crate) fn new(dims: Dims, conn: Connectivity) -> Self {
        let sx = 1isize;
        let sy = dims.nx as isize;
        let sz = (dims.nx * dims.ny) as isize;
        let offsets = conn
            .offsets()
            .into_iter()
            .map(|o| (o, o[0] as isize * sx + o[1] as isize * sy + o[2] as isize * sz))
            .collect();
        Self { dims, offsets }
    }

    /// Calls `f` with every in-bounds neighbor of `index`.
    #[inline]
    pub(crate) fn for_each(&self, index: usize, mut f: impl FnMut(usize)) {
        let (x, y, z) = self.dims.coords(index);
        let interior = x > 0
            && y > 0
            && z > 0
            && x + 1 < self.dims.nx
            && y + 1 < self.dims.ny
            && z + 1 < self.dims.nz;
        if interior {
            for &(_, delta) in &self.offsets {
                f((index as isize + delta) as usize);
            }
        } else {
            let (x, y, z) = (x as i64, y as i64, z as i64);
            for &([dx, dy, dz], delta) in &self.offsets {
                let (nx, ny, nz) = (x + dx as i64, y + dy as i64, z + dz as i64);
                if nx >= 0
                    && ny >= 0
                    && nz >= 0
                    && (nx as usize) < self.dims.nx
                    && (ny as usize) < self.dims.ny
                    && (nz as usize) < self.dims.nz
                {
                    f((index as isize + delta) as usize);
                }
            }
        }
    }
}

/// A set of integer voxel offsets, symmetric under negation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StructuringElement {
    offsets: Vec<[i32; 3]>,
}

impl StructuringElement {
    /// Builds an element from arbitrary offsets. The set must contain the
    /// origin and be closed under negation.
    pub fn from_offsets(mut offsets: Vec<[i32; 3]>) -> Result<Self> {
        offsets.sort_unstable_by_key(|o| (o[2], o[1], o[0]));
        offsets.dedup();
        let has_origin = offsets.contains(&[0, 0, 0]);
        let symmetric = offsets
            .iter()
            .all(|o| offsets.binary_search_by_key(&(-o[2], -o[1], -o[0]), |p| (p[2], p[1], p[0])).is_ok());
        if !has_origin || !symmetric {
            return Err(Error::InvalidParameter {
                name: "structuring element",
                reason: "must contain the origin and be symmetric".into(),
            });
        }
        Ok(Self { offsets })
    }

    pub fn offsets(&self) -> &[[i32; 3]] {
        &self.offsets
    }

    pub fn len(&self) -> usize {
        self.offsets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.offsets.is_empty()
    }

    fn grouped_by_dz(&self) -> Vec<(i32, Vec<(i32, i32)>)> {
        let mut groups: Vec<(i32, Vec<(i32, i32)>)> = Vec::new();
        for o in &self.offsets {
            match groups.last_mut() {
                Some((dz, planar)) if *dz == o[2] => planar.push((o[0], o[1])),
                _ => groups.push((o[2], vec![(o[0], o[1])])),
            }
        }
        groups
    }
}

/// The discrete ball of the given odd diameter: every offset with
/// `dx² + dy² + dz² <= r²`, `r = (diameter - 1) / 2`.
pub fn ball_element(diameter: i64) -> Result<StructuringElement> {
    if diameter < 1 || diameter % 2 == 0 {
        return Err(Error::InvalidDiameter(diameter));
    }
    let r = ((diameter - 1) / 2) as i32;
    let mut offsets = Vec::new();
    for dz in -r..=r {
        for dy in -r..=r {
            for dx in -r..=r {
                if dx * dx + dy * dy + dz * dz <= r * r {
                    offsets.push([dx, dy, dz]);
                }
            }
        }
    }
    StructuringElement::from_offsets(offsets)
}

/// `out(v) = OR_{o in se} bin(v - o)`, reads outside the volume are false.
pub fn dilate(bin: &BinaryVolume, se: &StructuringElement) -> BinaryVolume {
    let dims = bin.dims();
    let (nx, ny, nz) = (dims.nx as i64, dims.ny as i64, dims.nz as i64);
    let slice = dims.slice_len();
    let groups = se.grouped_by_dz();
    let src = bin.data();
    let mut out = vec![false; dims.len()];

    out.par_chunks_mut(slice).enumerate().for_each(|(z, out_slice)| {
        for (dz, planar) in &groups {
            let sz = z as i64 - *dz as i64;
            if sz < 0 || sz >= nz {
                continue;
            }
            let source = &src[sz as usize * slice..(sz as usize + 1) * slice];
            for (i, _) in source.iter().enumerate().filter(|(_, &b)| b) {
                let (x, y) = ((i % dims.nx) as i64, (i / dims.nx) as i64);
                for &(dx, dy) in planar {
                    let (tx, ty) = (x + dx as i64, y + dy as i64);
                    if tx >= 0 && ty >= 0 && tx < nx && ty < ny {
                        out_slice[(tx + nx * ty) as usize] = true;
                    }
                }
            }
        }
    });
    BinaryVolume::from_vec(dims, out).expect("same extent")
}

/// `out(v) = AND_{o in se} bin(v + o)`, reads outside the volume are false.
pub fn erode(bin: &BinaryVolume, se: &StructuringElement) -> BinaryVolume {
    let dims = bin.dims();
    let slice = dims.slice_len();
    let src = bin.data();
    let mut out = vec![false; dims.len()];

    out.par_chunks_mut(slice).enumerate().for_each(|(z, out_slice)| {
        for (i, o) in out_slice.iter_mut().enumerate() {
            let index = z * slice + i;
            // The origin is in every element, so false input stays false.
            if !src[index] {
                continue;
            }
            let (x, y) = ((i % dims.nx) as i64, (i / dims.nx) as i64);
            *o = se.offsets().iter().all(|d| {
                dims.checked_index(x + d[0] as i64, y + d[1] as i64, z as i64 + d[2] as i64)
                    .is_some_and(|j| src[j])
            });
        }
    });
    BinaryVolume::from_vec(dims, out).expect("same extent")
}

/// Dilation followed by erosion with the same element.
pub fn closing(bin: &BinaryVolume, se: &StructuringElement) -> BinaryVolume {
    erode(&dilate(bin, se), se)
}

/// Labels each maximal connected foreground region with a unique id.
///
/// Labels are assigned 1, 2, ... in ascending order of each component's
/// smallest flat index.
pub fn connected_components(bin: &BinaryVolume, conn: Connectivity) -> LabelVolume {
    let dims = bin.dims();
    let src = bin.data();
    let nbhd = Neighborhood::new(dims, conn);
    let mut labels = vec![0u32; dims.len()];
    let mut stack = Vec::new();
    let mut next = 0u32;

    for start in 0..dims.len() {
        if !src[start] || labels[start] != 0 {
            continue;
        }
        next += 1;
        labels[start] = next;
        stack.push(start);
        while let Some(i) = stack.pop() {
            nbhd.for_each(i, |j| {
                if src[j] && labels[j] == 0 {
                    labels[j] = next;
                    stack.push(j);
                }
            });
        }
    }
    LabelVolume::from_vec(dims, labels).expect("same extent")
}

/// Voxel count per label, indexed by label (entry 0 counts background).
pub(crate) fn label_sizes(labels: &LabelVolume) -> Vec<usize> {
    let mut sizes = vec![0usize; labels.max_label() as usize + 1];
    for &l in labels.data() {
        sizes[l as usize] += 1;
    }
    sizes
}

/// Drops every connected component with fewer than `min_size` voxels.
pub fn remove_small_objects(bin: &BinaryVolume, min_size: usize, conn: Connectivity) -> BinaryVolume {
    if min_size == 0 {
        return bin.clone();
    }
    let labels = connected_components(bin, conn);
    let sizes = label_sizes(&labels);
    labels.map(|l| l != 0 && sizes[l as usize] >= min_size)
}

/// `a AND NOT b`.
pub fn mask_subtract(a: &BinaryVolume, b: &BinaryVolume) -> Result<BinaryVolume> {
    a.zip_map(b, |x, y| x && !y)
}
