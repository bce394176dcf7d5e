//! Synthetic specimens with exactly known ground truth.
//!
//! A phantom is an ellipsoidal specimen partitioned into Voronoi cells. Its
//! three probability maps mimic what a 3-class network would output for it:
//! membranes on every label interface, small balls at the cell centers and
//! background outside the ellipsoid. Failure modes (depth fading, noise,
//! missing interfaces, bright interior artifacts) can be injected.
//!
//! Randomness is fully determined by `rng_seed`. Seed placement uses
//! ChaCha8 (`rand_chacha::ChaCha8Rng::seed_from_u64`). Noise is counter-based:
//! each voxel draws from SplitMix64 applied to its flat index, so it does not
//! depend on iteration order or thread count.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::volume::{write_volume, Dims, LabelVolume, ScalarVolume};

/// Radius of the centroid ball drawn around each cell seed.
pub const CENTROID_RADIUS: f64 = 2.0;

/// A thin sheet of high membrane probability across one cell's interior.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InteriorRidge {
    /// Ground-truth label of the cell that receives the ridge.
    pub cell: u32,
    /// Sheet normal; need not be normalized.
    pub normal: [f64; 3],
    /// Signed distance of the sheet from the cell seed along the normal.
    pub offset: f64,
    /// Membrane probability painted on the sheet.
    pub value: f32,
    /// Sheet thickness along the normal. Values of at least 2 keep the two
    /// halves of the cell apart under face connectivity for any normal.
    #[serde(default = "default_ridge_width")]
    pub width: f64,
}

fn default_ridge_width() -> f64 {
    2.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PhantomConfig {
    pub dims: Dims,
    pub n_cells: usize,
    pub rng_seed: u64,
    /// Membrane voxels are those within this distance of a voxel with a
    /// different ground-truth label.
    pub membrane_halfwidth: f64,
    /// Ellipsoid semi-axes in voxels; centered in the volume.
    pub semi_axes: [f64; 3],
    /// Depth attenuation: probabilities are scaled by `1 - fade·z/nz`.
    pub fade: f64,
    /// Standard deviation of additive Gaussian noise on all maps.
    pub noise_sigma: f64,
    /// Label pairs whose shared membrane is suppressed to `dropout_level`.
    pub dropout_interfaces: Vec<(u32, u32)>,
    pub dropout_level: f32,
    pub interior_ridges: Vec<InteriorRidge>,
    /// Minimum distance between seeds; defaults to `4·membrane_halfwidth`.
    pub min_seed_spacing: Option<f64>,
    /// Seeds keep at least this distance from the specimen surface.
    pub seed_margin: f64,
    /// Total candidate draws allowed when placing seeds.
    pub max_attempts: usize,
}

impl Default for PhantomConfig {
    fn default() -> Self {
        let n = 64;
        Self {
            dims: Dims { nx: n, ny: n, nz: n },
            n_cells: 8,
            rng_seed: 1,
            membrane_halfwidth: 1.0,
            semi_axes: [27.0, 27.0, 27.0],
            fade: 0.0,
            noise_sigma: 0.0,
            dropout_interfaces: Vec::new(),
            dropout_level: 0.3,
            interior_ridges: Vec::new(),
            min_seed_spacing: None,
            seed_margin: 4.0,
            max_attempts: 200_000,
        }
    }
}

impl PhantomConfig {
    fn spacing(&self) -> f64 {
        self.min_seed_spacing.unwrap_or(4.0 * self.membrane_halfwidth)
    }

    fn center(&self) -> [f64; 3] {
        [
            (self.dims.nx as f64 - 1.0) / 2.0,
            (self.dims.ny as f64 - 1.0) / 2.0,
            (self.dims.nz as f64 - 1.0) / 2.0,
        ]
    }

    fn validate(&self) -> Result<()> {
        let bad = |name, reason: &str| {
            Err(Error::InvalidParameter {
                name,
                reason: reason.to_string(),
            })
        };
        if self.n_cells == 0 {
            return bad("n_cells", "must be at least 1");
        }
        if self.membrane_halfwidth < 1.0 {
            return bad("membrane_halfwidth", "must be at least 1");
        }
        if self.semi_axes.iter().any(|&a| a <= 0.0) {
            return bad("semi_axes", "must be positive");
        }
        if !(0.0..=1.0).contains(&self.fade) {
            return bad("fade", "must lie in [0, 1]");
        }
        if self.noise_sigma < 0.0 {
            return bad("noise_sigma", "must be non-negative");
        }
        if self.spacing() < 4.0 * self.membrane_halfwidth {
            return bad("min_seed_spacing", "must be at least 4 membrane half-widths");
        }
        Ok(())
    }

    fn inside_specimen(&self, p: [f64; 3], shrink: f64) -> bool {
        let c = self.center();
        (0..3)
            .map(|k| {
                let a = self.semi_axes[k] - shrink;
                if a <= 0.0 {
                    f64::INFINITY
                } else {
                    ((p[k] - c[k]) / a).powi(2)
                }
            })
            .sum::<f64>()
            <= 1.0
    }
}

/// Ground truth and the three probability maps of a phantom.
#[derive(Debug, Clone, PartialEq)]
pub struct Phantom {
    pub gt: LabelVolume,
    pub centroid: ScalarVolume,
    pub membrane: ScalarVolume,
    pub background: ScalarVolume,
    /// Seed position of cell `k` (label `k + 1`).
    pub seeds: Vec<[f64; 3]>,
}

#[derive(Serialize)]
struct Sidecar<'a> {
    config: &'a PhantomConfig,
    seeds: &'a [[f64; 3]],
}

impl Phantom {
    /// Writes `gt.nrrd`, `centroid.nrrd`, `membrane.nrrd`, `background.nrrd`
    /// and `phantom.json` into `dir`.
    pub fn write_to(&self, dir: impl AsRef<Path>, cfg: &PhantomConfig) -> Result<()> {
        let dir = dir.as_ref();
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        write_volume(self.gt.clone(), dir.join("gt.nrrd"))?;
        write_volume(self.centroid.clone(), dir.join("centroid.nrrd"))?;
        write_volume(self.membrane.clone(), dir.join("membrane.nrrd"))?;
        write_volume(self.background.clone(), dir.join("background.nrrd"))?;
        let path = dir.join("phantom.json");
        let text = serde_json::to_string_pretty(&Sidecar {
            config: cfg,
            seeds: &self.seeds,
        })?;
        std::fs::write(&path, text + "\n").map_err(|e| Error::io(&path, e))
    }
}

fn place_seeds(cfg: &PhantomConfig) -> Result<Vec<[f64; 3]>> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.rng_seed);
    let c = cfg.center();
    let spacing2 = cfg.spacing().powi(2);
    let mut seeds: Vec<[f64; 3]> = Vec::with_capacity(cfg.n_cells);
    let mut failures = 0usize;
    for _ in 0..cfg.max_attempts {
        if seeds.len() == cfg.n_cells {
            break;
        }
        let p = [0, 1, 2].map(|k| {
            let a = (cfg.semi_axes[k] - cfg.seed_margin).max(0.0);
            c[k] + rng.random_range(-1.0..=1.0) * a
        });
        let ok = cfg.inside_specimen(p, cfg.seed_margin)
            && seeds
                .iter()
                .all(|s| (0..3).map(|k| (s[k] - p[k]).powi(2)).sum::<f64>() >= spacing2);
        if ok {
            seeds.push(p);
            failures = 0;
        } else {
            failures += 1;
            // Jammed configuration: start over.
            if failures > 2_000 {
                seeds.clear();
                failures = 0;
            }
        }
    }
    if seeds.len() < cfg.n_cells {
        return Err(Error::SeedsUnplaceable {
            n_cells: cfg.n_cells,
            attempts: cfg.max_attempts,
        });
    }
    Ok(seeds)
}

#[inline]
fn dist2(a: [f64; 3], b: [f64; 3]) -> f64 {
    (a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2) + (a[2] - b[2]).powi(2)
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Standard normal sample for voxel `index` of stream `stream`.
fn gaussian(seed: u64, stream: u64, index: u64) -> f64 {
    let base = splitmix64(seed ^ stream.wrapping_mul(0xd1b5_4a32_d192_ed03)) ^ index.wrapping_mul(2);
    let u1 = ((splitmix64(base) >> 11) as f64 + 0.5) / (1u64 << 53) as f64;
    let u2 = (splitmix64(base ^ 1) >> 11) as f64 / (1u64 << 53) as f64;
    (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}

/// Builds a phantom from `cfg`.
pub fn generate(cfg: &PhantomConfig) -> Result<Phantom> {
    cfg.validate()?;
    let dims = cfg.dims;
    let seeds = place_seeds(cfg)?;
    let slice = dims.slice_len();
    let point = |i: usize| {
        let (x, y, z) = dims.coords(i);
        [x as f64, y as f64, z as f64]
    };

    // Voronoi partition of the specimen; ties go to the lower index.
    let mut gt = vec![0u32; dims.len()];
    gt.par_chunks_mut(slice).enumerate().for_each(|(z, out)| {
        for (j, o) in out.iter_mut().enumerate() {
            let p = point(z * slice + j);
            if !cfg.inside_specimen(p, 0.0) {
                continue;
            }
            let mut best = (f64::INFINITY, 0u32);
            for (k, s) in seeds.iter().enumerate() {
                let d = dist2(p, *s);
                if d < best.0 {
                    best = (d, k as u32 + 1);
                }
            }
            *o = best.1;
        }
    });

    // Membranes: every voxel within the half-width of a differently labeled voxel.
    let r = cfg.membrane_halfwidth;
    let ri = r.floor() as i64;
    let mut offsets = Vec::new();
    for dz in -ri..=ri {
        for dy in -ri..=ri {
            for dx in -ri..=ri {
                if (dx, dy, dz) != (0, 0, 0) && ((dx * dx + dy * dy + dz * dz) as f64) <= r * r {
                    offsets.push((dx, dy, dz));
                }
            }
        }
    }
    let dropped: BTreeSet<(u32, u32)> = cfg
        .dropout_interfaces
        .iter()
        .map(|&(a, b)| (a.min(b), a.max(b)))
        .collect();
    let mut membrane = vec![0f32; dims.len()];
    membrane.par_chunks_mut(slice).enumerate().for_each(|(z, out)| {
        for (j, o) in out.iter_mut().enumerate() {
            let i = z * slice + j;
            let (x, y, _) = dims.coords(i);
            let own = gt[i];
            let mut value = 0f32;
            for &(dx, dy, dz) in &offsets {
                let Some(n) = dims.checked_index(x as i64 + dx, y as i64 + dy, z as i64 + dz) else {
                    continue;
                };
                let other = gt[n];
                if other != own {
                    let v = if dropped.contains(&(own.min(other), own.max(other))) {
                        cfg.dropout_level
                    } else {
                        1.0
                    };
                    value = value.max(v);
                }
            }
            *o = value;
        }
    });

    for ridge in &cfg.interior_ridges {
        if ridge.cell == 0 || ridge.cell as usize > seeds.len() {
            return Err(Error::InvalidParameter {
                name: "interior_ridges",
                reason: format!("no cell with label {}", ridge.cell),
            });
        }
        let s = seeds[ridge.cell as usize - 1];
        let norm = ridge.normal.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm == 0.0 {
            return Err(Error::InvalidParameter {
                name: "interior_ridges",
                reason: "normal must be nonzero".into(),
            });
        }
        let n = ridge.normal.map(|v| v / norm);
        let half = ridge.width / 2.0;
        for (i, m) in membrane.iter_mut().enumerate() {
            if gt[i] != ridge.cell {
                continue;
            }
            let p = point(i);
            let d = (0..3).map(|k| (p[k] - s[k]) * n[k]).sum::<f64>() - ridge.offset;
            if (-half..half).contains(&d) {
                *m = m.max(ridge.value);
            }
        }
    }

    let r2 = CENTROID_RADIUS * CENTROID_RADIUS;
    let mut centroid = vec![0f32; dims.len()];
    for s in &seeds {
        let lo = s.map(|v| (v - CENTROID_RADIUS).ceil().max(0.0) as usize);
        let hi = [dims.nx, dims.ny, dims.nz]
            .iter()
            .zip(s)
            .map(|(&n, &v)| ((v + CENTROID_RADIUS).floor() as usize).min(n - 1))
            .collect::<Vec<_>>();
        for z in lo[2]..=hi[2] {
            for y in lo[1]..=hi[1] {
                for x in lo[0]..=hi[0] {
                    if dist2([x as f64, y as f64, z as f64], *s) <= r2 {
                        centroid[dims.index(x, y, z)] = 1.0;
                    }
                }
            }
        }
    }

    let mut background: Vec<f32> = gt.iter().map(|&l| (l == 0) as u8 as f32).collect();

    if cfg.fade > 0.0 {
        let nz = dims.nz as f64;
        for (z, (m, c)) in membrane
            .chunks_mut(slice)
            .zip(centroid.chunks_mut(slice))
            .enumerate()
        {
            let k = (1.0 - cfg.fade * z as f64 / nz) as f32;
            m.iter_mut().for_each(|v| *v *= k);
            c.iter_mut().for_each(|v| *v *= k);
        }
    }

    if cfg.noise_sigma > 0.0 {
        for (stream, map) in [&mut centroid, &mut membrane, &mut background].into_iter().enumerate() {
            map.par_iter_mut().enumerate().for_each(|(i, v)| {
                let n = cfg.noise_sigma * gaussian(cfg.rng_seed, stream as u64 + 1, i as u64);
                *v = (*v as f64 + n).clamp(0.0, 1.0) as f32;
            });
        }
    }

    Ok(Phantom {
        gt: LabelVolume::from_vec(dims, gt)?,
        centroid: ScalarVolume::from_vec(dims, centroid)?,
        membrane: ScalarVolume::from_vec(dims, membrane)?,
        background: ScalarVolume::from_vec(dims, background)?,
        seeds,
    })
}

/// Face-contact counts between distinct nonzero labels, keyed `(low, high)`.
pub fn cell_interfaces(gt: &LabelVolume) -> BTreeMap<(u32, u32), u64> {
    let dims = gt.dims();
    let data = gt.data();
    let strides = [1, dims.nx, dims.slice_len()];
    let mut out = BTreeMap::new();
    for i in 0..data.len() {
        let (x, y, z) = dims.coords(i);
        let inside = [x + 1 < dims.nx, y + 1 < dims.ny, z + 1 < dims.nz];
        for axis in 0..3 {
            if !inside[axis] {
                continue;
            }
            let (a, b) = (data[i], data[i + strides[axis]]);
            if a != b && a != 0 && b != 0 {
                *out.entry((a.min(b), a.max(b))).or_insert(0) += 1;
            }
        }
    }
    out
}

/// The pair of cells sharing the largest face-contact area.
pub fn largest_interface(gt: &LabelVolume) -> Option<(u32, u32)> {
    cell_interfaces(gt)
        .into_iter()
        .max_by(|a, b| a.1.cmp(&b.1).then(b.0.cmp(&a.0)))
        .map(|(k, _)| k)
}
