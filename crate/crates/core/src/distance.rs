//! Exact Euclidean distance transform and the flooding landscape built on it.
//!
//! The transform runs three separable passes (x, then y, then z), each
//! computing the lower envelope of the parabolas `(q - p)² + f(p)` along one
//! axis. Squared distances are integers throughout, so the result is exact.

use rayon::prelude::*;

use crate::error::Result;
use crate::volume::{BinaryVolume, Dims, ScalarVolume, Volume};

/// Marker for "no foreground seen yet" in squared-distance buffers.
pub const UNREACHED: u32 = u32::MAX;

/// One-dimensional squared distance transform of sampled function `f`.
///
/// Entries equal to [`UNREACHED`] are treated as +infinity. If every entry is
/// unreached the output is too.
fn envelope_1d(f: &[u32], out: &mut [u32], sites: &mut Vec<i64>, bounds: &mut Vec<f64>) {
    sites.clear();
    bounds.clear();
    let n = f.len();
    let val = |q: i64| f[q as usize] as i64 + q * q;

    for q in 0..n as i64 {
        if f[q as usize] == UNREACHED {
            continue;
        }
        // Pop parabolas that the new one hides entirely.
        let mut s = f64::NEG_INFINITY;
        while let Some(&v) = sites.last() {
            s = (val(q) - val(v)) as f64 / (2 * (q - v)) as f64;
            if s <= *bounds.last().unwrap() {
                sites.pop();
                bounds.pop();
            } else {
                break;
            }
        }
        if sites.is_empty() {
            s = f64::NEG_INFINITY;
        }
        sites.push(q);
        bounds.push(s);
    }

    if sites.is_empty() {
        out.fill(UNREACHED);
        return;
    }
    let mut k = 0;
    for (q, o) in out.iter_mut().enumerate().take(n) {
        while k + 1 < sites.len() && bounds[k + 1] < q as f64 {
            k += 1;
        }
        let v = sites[k];
        let d = q as i64 - v;
        *o = (d * d + f[v as usize] as i64) as u32;
    }
}

fn pass_contiguous(data: &mut [u32], len: usize) {
    data.par_chunks_mut(len).for_each_init(
        || (vec![0u32; len], Vec::new(), Vec::new()),
        |(buf, sites, bounds), line| {
            buf.copy_from_slice(line);
            envelope_1d(buf, line, sites, bounds);
        },
    );
}

fn pass_y(data: &mut [u32], dims: Dims) {
    let (nx, ny) = (dims.nx, dims.ny);
    data.par_chunks_mut(dims.slice_len()).for_each_init(
        || (vec![0u32; ny], vec![0u32; ny], Vec::new(), Vec::new()),
        |(line, out, sites, bounds), slice| {
            for x in 0..nx {
                for y in 0..ny {
                    line[y] = slice[x + nx * y];
                }
                envelope_1d(line, out, sites, bounds);
                for y in 0..ny {
                    slice[x + nx * y] = out[y];
                }
            }
        },
    );
}

fn pass_z(data: &mut [u32], dims: Dims) {
    let (nx, ny, nz) = (dims.nx, dims.ny, dims.nz);
    let slice = dims.slice_len();
    let src: &[u32] = data;
    // Rows of fixed y, laid out as [x][z], one per task.
    let rows: Vec<Vec<u32>> = (0..ny)
        .into_par_iter()
        .map_init(
            || (vec![0u32; nz], Vec::new(), Vec::new()),
            |(line, sites, bounds), y| {
                let mut row = vec![0u32; nx * nz];
                for x in 0..nx {
                    for z in 0..nz {
                        line[z] = src[x + nx * y + slice * z];
                    }
                    envelope_1d(line, &mut row[x * nz..(x + 1) * nz], sites, bounds);
                }
                row
            },
        )
        .collect();
    for (y, row) in rows.iter().enumerate() {
        for x in 0..nx {
            for z in 0..nz {
                data[x + nx * y + slice * z] = row[x * nz + z];
            }
        }
    }
}

/// Squared Euclidean distance from every voxel to the nearest true voxel.
///
/// Every entry is [`UNREACHED`] when the mask has no foreground.
pub fn squared_edt(bin: &BinaryVolume) -> Volume<u32> {
    let dims = bin.dims();
    let mut data: Vec<u32> = bin.data().iter().map(|&b| if b { 0 } else { UNREACHED }).collect();
    pass_contiguous(&mut data, dims.nx);
    pass_y(&mut data, dims);
    pass_z(&mut data, dims);
    Volume::from_vec(dims, data).expect("same extent")
}

/// Euclidean distance (in voxels) from every voxel to the nearest true voxel.
///
/// An all-false mask yields `nx + ny + nz` everywhere, which exceeds any
/// distance realizable inside the volume.
pub fn edt(bin: &BinaryVolume) -> ScalarVolume {
    let dims = bin.dims();
    let sentinel = (dims.nx + dims.ny + dims.nz) as f32;
    squared_edt(bin).map(|d| if d == UNREACHED { sentinel } else { (d as f64).sqrt() as f32 })
}

/// Landscape for seeded flooding: `(membrane_prob - edt(membrane)) * (1 - background)`.
///
/// Cell interiors are negative with minima near cell centers, membranes sit
/// at their probability, and background voxels are exactly `0.0`.
pub fn build_landscape(
    membrane_prob: &ScalarVolume,
    membrane_bin: &BinaryVolume,
    background_bin: &BinaryVolume,
) -> Result<ScalarVolume> {
    let dims = membrane_prob.dims();
    dims.ensure_same(&membrane_bin.dims())?;
    dims.ensure_same(&background_bin.dims())?;
    let dist = edt(membrane_bin);
    let data = membrane_prob
        .data()
        .par_iter()
        .zip(dist.data().par_iter())
        .zip(background_bin.data().par_iter())
        .map(|((&p, &d), &bg)| if bg { 0.0 } else { p - d })
        .collect();
    ScalarVolume::from_vec(dims, data)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::volume::Dims;
    use proptest::prelude::*;

    fn brute_squared(bin: &BinaryVolume) -> Vec<u32> {
        let d = bin.dims();
        let fg: Vec<(i64, i64, i64)> = (0..d.len())
            .filter(|&i| bin.data()[i])
            .map(|i| {
                let (x, y, z) = d.coords(i);
                (x as i64, y as i64, z as i64)
            })
            .collect();
        (0..d.len())
            .map(|i| {
                let (x, y, z) = d.coords(i);
                fg.iter()
                    .map(|&(a, b, c)| {
                        let (dx, dy, dz) = (x as i64 - a, y as i64 - b, z as i64 - c);
                        (dx * dx + dy * dy + dz * dz) as u32
                    })
                    .min()
                    .unwrap_or(UNREACHED)
            })
            .collect()
    }

    #[test]
    fn corner_voxel() {
        let mut b = BinaryVolume::filled(Dims::cube(3).unwrap(), false);
        b.set(0, 0, 0, true);
        let e = edt(&b);
        assert_eq!(e.get(1, 1, 1), 3f32.sqrt());
        assert_eq!(e.get(2, 2, 2), 12f32.sqrt());
        assert_eq!(e.get(0, 0, 0), 0.0);
    }

    #[test]
    fn all_true_and_all_false() {
        let d = Dims::new(4, 5, 6).unwrap();
        assert!(edt(&BinaryVolume::filled(d, true)).data().iter().all(|&v| v == 0.0));
        assert!(edt(&BinaryVolume::filled(d, false)).data().iter().all(|&v| v == 15.0));
    }

    #[test]
    fn landscape_slab() {
        // Membrane planes at x = 0 and x = 10, nothing else.
        let d = Dims::new(11, 3, 3).unwrap();
        let mbin = BinaryVolume::from_fn(d, |x, _, _| x == 0 || x == 10);
        let prob = mbin.map(|b| if b { 0.9 } else { 0.0 });
        let bg = BinaryVolume::filled(d, false);
        let l = build_landscape(&prob, &mbin, &bg).unwrap();
        let profile: Vec<f32> = (0..11).map(|x| l.get(x, 1, 1)).collect();
        assert_eq!(profile[5], -5.0);
        assert_eq!(profile[0], 0.9);
        let min = profile.iter().cloned().fold(f32::INFINITY, f32::min);
        assert_eq!(min, -5.0);

        let all_bg = BinaryVolume::filled(d, true);
        let l = build_landscape(&prob, &mbin, &all_bg).unwrap();
        assert!(l.data().iter().all(|&v| v == 0.0 && v.is_sign_positive()));
    }

    #[test]
    fn landscape_rejects_mismatched_dims() {
        let a = ScalarVolume::filled(Dims::cube(3).unwrap(), 0.0);
        let b = BinaryVolume::filled(Dims::cube(4).unwrap(), false);
        let c = BinaryVolume::filled(Dims::cube(3).unwrap(), false);
        assert!(build_landscape(&a, &b, &c).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn matches_brute_force(nx in 1usize..12, ny in 1usize..12, nz in 1usize..12,
                               density in 0.0f64..0.3, seed in any::<u64>()) {
            let d = Dims::new(nx, ny, nz).unwrap();
            let mut state = seed;
            let bin = BinaryVolume::from_fn(d, |_, _, _| {
                state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                ((state >> 11) as f64 / (1u64 << 53) as f64) < density
            });
            let fast = squared_edt(&bin);
            prop_assert_eq!(fast.data(), &brute_squared(&bin)[..]);
        }

        #[test]
        fn lipschitz_under_face_steps(bits in prop::collection::vec(prop::bool::weighted(0.05), 1000)) {
            let d = Dims::cube(10).unwrap();
            let bin = BinaryVolume::from_vec(d, bits).unwrap();
            prop_assume!(bin.count() > 0);
            let e = edt(&bin);
            for z in 0..10 { for y in 0..10 { for x in 0..9 {
                prop_assert!((e.get(x, y, z) - e.get(x + 1, y, z)).abs() <= 1.0 + 1e-6);
                prop_assert!((e.get(y, x, z) - e.get(y, x + 1, z)).abs() <= 1.0 + 1e-6);
                prop_assert!((e.get(y, z, x) - e.get(y, z, x + 1)).abs() <= 1.0 + 1e-6);
            }}}
        }
    }
}
