//! Dense volumetric containers and index arithmetic.
//!
//! All volumes store their voxels in a flat vector with x varying fastest:
//! `index = x + nx * (y + ny * z)`. This is the same ordering NRRD uses for
//! raw payloads, so reading and writing never needs to transpose.

mod nrrd;

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use nrrd::{read_volume, write_volume, AnyVolume};

/// Extent of a volume in voxels.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Dims {
    pub nx: usize,
    pub ny: usize,
    pub nz: usize,
}

impl Dims {
    pub fn new(nx: usize, ny: usize, nz: usize) -> Result<Self> {
        let ok = nx > 0
            && ny > 0
            && nz > 0
            && nx
                .checked_mul(ny)
                .and_then(|p| p.checked_mul(nz))
                .is_some();
        if !ok {
            return Err(Error::InvalidDims { nx, ny, nz });
        }
        Ok(Self { nx, ny, nz })
    }

    pub fn cube(n: usize) -> Result<Self> {
        Self::new(n, n, n)
    }

    /// Number of voxels.
    #[inline]
    pub fn len(&self) -> usize {
        self.nx * self.ny * self.nz
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Voxels per z-slice.
    #[inline]
    pub fn slice_len(&self) -> usize {
        self.nx * self.ny
    }

    #[inline]
    pub fn index(&self, x: usize, y: usize, z: usize) -> usize {
        debug_assert!(x < self.nx && y < self.ny && z < self.nz);
        x + self.nx * (y + self.ny * z)
    }

    #[inline]
    pub fn coords(&self, index: usize) -> (usize, usize, usize) {
        let x = index % self.nx;
        let rest = index / self.nx;
        (x, rest % self.ny, rest / self.ny)
    }

    /// Flat index of `(x, y, z)` if it lies inside the volume.
    #[inline]
    pub fn checked_index(&self, x: i64, y: i64, z: i64) -> Option<usize> {
        if x < 0 || y < 0 || z < 0 {
            return None;
        }
        let (x, y, z) = (x as usize, y as usize, z as usize);
        (x < self.nx && y < self.ny && z < self.nz).then(|| self.index(x, y, z))
    }

    pub(crate) fn ensure_same(&self, other: &Dims) -> Result<()> {
        if self != other {
            return Err(Error::DimsMismatch {
                left: *self,
                right: *other,
            });
        }
        Ok(())
    }
}

impl fmt::Display for Dims {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}x{}x{}", self.nx, self.ny, self.nz)
    }
}

/// A dense 3D grid of voxels.
#[derive(Debug, Clone, PartialEq)]
pub struct Volume<T> {
    dims: Dims,
    data: Vec<T>,
}

/// Probability maps and distance landscapes.
pub type ScalarVolume = Volume<f32>;
/// Thresholded class masks.
pub type BinaryVolume = Volume<bool>;
/// Instance labelings; 0 is background.
pub type LabelVolume = Volume<u32>;

impl<T: Copy> Volume<T> {
    pub fn filled(dims: Dims, value: T) -> Self {
        Self {
            dims,
            data: vec![value; dims.len()],
        }
    }

    pub fn from_vec(dims: Dims, data: Vec<T>) -> Result<Self> {
        if data.len() != dims.len() {
            return Err(Error::LengthMismatch {
                expected: dims.len(),
                actual: data.len(),
            });
        }
        Ok(Self { dims, data })
    }

    /// Builds a volume by evaluating `f(x, y, z)` at every voxel.
    pub fn from_fn(dims: Dims, mut f: impl FnMut(usize, usize, usize) -> T) -> Self {
        let mut data = Vec::with_capacity(dims.len());
        for z in 0..dims.nz {
            for y in 0..dims.ny {
                for x in 0..dims.nx {
                    data.push(f(x, y, z));
                }
            }
        }
        Self { dims, data }
    }

    #[inline]
    pub fn dims(&self) -> Dims {
        self.dims
    }

    #[inline]
    pub fn data(&self) -> &[T] {
        &self.data
    }

    #[inline]
    pub fn data_mut(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<T> {
        self.data
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize, z: usize) -> T {
        self.data[self.dims.index(x, y, z)]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, z: usize, value: T) {
        let i = self.dims.index(x, y, z);
        self.data[i] = value;
    }

    pub fn map<U: Copy>(&self, f: impl Fn(T) -> U) -> Volume<U> {
        Volume {
            dims: self.dims,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    /// Voxelwise combination of two volumes of equal extent.
    pub fn zip_map<U: Copy, V: Copy>(
        &self,
        other: &Volume<U>,
        f: impl Fn(T, U) -> V,
    ) -> Result<Volume<V>> {
        self.dims.ensure_same(&other.dims)?;
        Ok(Volume {
            dims: self.dims,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        })
    }

    /// Copies the z-range `z0..z1` into a new volume.
    pub fn crop_z(&self, z0: usize, z1: usize) -> Volume<T> {
        let z1 = z1.min(self.dims.nz);
        assert!(z0 < z1, "empty z-range");
        let s = self.dims.slice_len();
        Volume {
            dims: Dims {
                nz: z1 - z0,
                ..self.dims
            },
            data: self.data[z0 * s..z1 * s].to_vec(),
        }
    }
}

impl ScalarVolume {
    /// Foreground wherever the value is at least `t`.
    pub fn threshold(&self, t: f32) -> BinaryVolume {
        self.map(|v| v >= t)
    }

    /// Foreground wherever the value is strictly below `t`.
    pub fn below(&self, t: f32) -> BinaryVolume {
        self.map(|v| v < t)
    }

    pub fn check_finite(&self) -> Result<()> {
        match self.data.iter().position(|v| !v.is_finite()) {
            Some(index) => Err(Error::NonFinite { index }),
            None => Ok(()),
        }
    }

    pub fn check_probability(&self, name: &'static str) -> Result<()> {
        match self
            .data
            .iter()
            .position(|v| !(0.0..=1.0).contains(v))
        {
            Some(index) => Err(Error::NotAProbability {
                name,
                index,
                value: self.data[index],
            }),
            None => Ok(()),
        }
    }
}

/// Free-function form of [`ScalarVolume::threshold`].
pub fn threshold(vol: &ScalarVolume, t: f32) -> BinaryVolume {
    vol.threshold(t)
}

impl BinaryVolume {
    pub fn count(&self) -> usize {
        self.data.iter().filter(|&&b| b).count()
    }

    pub fn complement(&self) -> BinaryVolume {
        self.map(|b| !b)
    }
}

impl LabelVolume {
    /// Distinct nonzero labels in ascending order.
    pub fn labels(&self) -> Vec<u32> {
        let mut labels: Vec<u32> = self.data.iter().copied().filter(|&l| l != 0).collect();
        labels.sort_unstable();
        labels.dedup();
        labels
    }

    pub fn instance_count(&self) -> usize {
        self.labels().len()
    }

    pub fn max_label(&self) -> u32 {
        self.data.iter().copied().max().unwrap_or(0)
    }

    pub fn foreground(&self) -> BinaryVolume {
        self.map(|l| l != 0)
    }
}
