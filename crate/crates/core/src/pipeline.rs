//! End-to-end strategies from 3-class probability maps to cell labels.
//!
//! * [`Method::Sws`]: seeds from the centroid map flood a distance landscape.
//! * [`Method::Ws`]: the membrane map is flooded from its own low regions.
//! * [`Method::Sv`]: supervoxels from membrane minima, merged across weak edges.
//!
//! All three finish by dropping segments that lie mostly in the background.

use serde::{Deserialize, Serialize};

use crate::distance::build_landscape;
use crate::error::{Error, Result};
use crate::morphology::{
    ball_element, closing, connected_components, mask_subtract, remove_small_objects, Connectivity,
};
use crate::supervoxel::{apply_mapping, build_rag, merge_supervoxels};
use crate::volume::{BinaryVolume, LabelVolume, ScalarVolume};
use crate::watershed::{local_minima_markers, marker_watershed, reject_background_segments, seeded_watershed};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    /// Seeded watershed on the membrane distance landscape.
    Sws,
    /// Plain watershed on the membrane probability map.
    Ws,
    /// Supervoxel merging.
    Sv,
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Method::Sws => "sws",
            Method::Ws => "ws",
            Method::Sv => "sv",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineConfig {
    pub membrane_threshold: f32,
    pub background_threshold: f32,
    pub centroid_threshold: f32,
    pub closing_diameter: i64,
    /// Background components smaller than this many voxels are discarded.
    pub min_background_object: usize,
    /// A segment is dropped when more than this fraction of it is background.
    pub background_reject_frac: f64,
    pub sv_merge_threshold: f64,
    pub seed_connectivity: Connectivity,
    pub background_connectivity: Connectivity,
    pub flood_connectivity: Connectivity,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            membrane_threshold: 0.5,
            background_threshold: 0.5,
            centroid_threshold: 0.8,
            closing_diameter: 5,
            min_background_object: 1000,
            background_reject_frac: 0.5,
            sv_merge_threshold: 0.5,
            seed_connectivity: Connectivity::Vertex26,
            background_connectivity: Connectivity::Vertex26,
            flood_connectivity: Connectivity::Face6,
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<()> {
        let unit = |name, v: f64| {
            if (0.0..=1.0).contains(&v) {
                Ok(())
            } else {
                Err(Error::InvalidParameter {
                    name,
                    reason: format!("{v} is outside [0, 1]"),
                })
            }
        };
        unit("membrane_threshold", self.membrane_threshold as f64)?;
        unit("background_threshold", self.background_threshold as f64)?;
        unit("centroid_threshold", self.centroid_threshold as f64)?;
        unit("background_reject_frac", self.background_reject_frac)?;
        unit("sv_merge_threshold", self.sv_merge_threshold)?;
        if self.closing_diameter < 1 || self.closing_diameter % 2 == 0 {
            return Err(Error::InvalidDiameter(self.closing_diameter));
        }
        Ok(())
    }
}

/// Binary masks derived from the probability maps.
#[derive(Debug, Clone, PartialEq)]
pub struct PreparedMasks {
    pub seeds: BinaryVolume,
    pub membrane: BinaryVolume,
    pub background: BinaryVolume,
}

/// Final labels plus bookkeeping for reports.
#[derive(Debug, Clone, PartialEq)]
pub struct Segmentation {
    pub labels: LabelVolume,
    /// Voxels that belonged to a segment dropped as background.
    pub rejected_voxels: usize,
    pub instance_count: usize,
}

fn check_maps(maps: &[(&ScalarVolume, &'static str)]) -> Result<()> {
    let dims = maps[0].0.dims();
    for (m, name) in maps {
        dims.ensure_same(&m.dims())?;
        m.check_probability(name)?;
    }
    Ok(())
}

fn background_mask(background: &ScalarVolume, cfg: &PipelineConfig) -> BinaryVolume {
    remove_small_objects(
        &background.threshold(cfg.background_threshold),
        cfg.min_background_object,
        cfg.background_connectivity,
    )
}

/// Thresholds the three maps, closes the seed mask and cuts membranes out of it.
pub fn preprocess_maps(
    centroid: &ScalarVolume,
    membrane: &ScalarVolume,
    background: &ScalarVolume,
    cfg: &PipelineConfig,
) -> Result<PreparedMasks> {
    cfg.validate()?;
    check_maps(&[(centroid, "centroid"), (membrane, "membrane"), (background, "background")])?;
    let membrane_bin = membrane.threshold(cfg.membrane_threshold);
    let se = ball_element(cfg.closing_diameter)?;
    let seeds = mask_subtract(&closing(&centroid.threshold(cfg.centroid_threshold), &se), &membrane_bin)?;
    Ok(PreparedMasks {
        seeds,
        membrane: membrane_bin,
        background: background_mask(background, cfg),
    })
}

fn finish(flooded: LabelVolume, background: &BinaryVolume, cfg: &PipelineConfig) -> Result<Segmentation> {
    let labels = reject_background_segments(&flooded, background, cfg.background_reject_frac)?;
    let rejected_voxels = flooded
        .data()
        .iter()
        .zip(labels.data())
        .filter(|(&a, &b)| a != 0 && b == 0)
        .count();
    let instance_count = labels.instance_count();
    log::debug!("{instance_count} instances, {rejected_voxels} voxels rejected as background");
    Ok(Segmentation {
        labels,
        rejected_voxels,
        instance_count,
    })
}

/// Seeded watershed.
///
/// Each seed component is a marker. Background voxels outside the seeds form
/// one extra marker so that cells do not leak into the background through
/// the (zero-valued) background part of the landscape; that marker's region
/// is cleared before the background rejection step.
pub fn segment_sws(
    centroid: &ScalarVolume,
    membrane: &ScalarVolume,
    background: &ScalarVolume,
    cfg: &PipelineConfig,
) -> Result<Segmentation> {
    let masks = preprocess_maps(centroid, membrane, background, cfg)?;
    let mut markers = connected_components(&masks.seeds, cfg.seed_connectivity);
    let k = markers.max_label();
    if k == 0 {
        return Err(Error::NoSeeds);
    }
    log::info!("sws: {k} seed components");
    let landscape = build_landscape(membrane, &masks.membrane, &masks.background)?;
    let bg_label = k + 1;
    for (m, &bg) in markers.data_mut().iter_mut().zip(masks.background.data()) {
        if bg && *m == 0 {
            *m = bg_label;
        }
    }
    let flooded = seeded_watershed(&landscape, &markers, cfg.flood_connectivity)?
        .map(|l| if l == bg_label { 0 } else { l });
    finish(flooded, &masks.background, cfg)
}

/// Plain watershed: components below the membrane threshold are the markers.
pub fn segment_ws(membrane: &ScalarVolume, background: &ScalarVolume, cfg: &PipelineConfig) -> Result<Segmentation> {
    cfg.validate()?;
    check_maps(&[(membrane, "membrane"), (background, "background")])?;
    let flooded = marker_watershed(membrane, cfg.membrane_threshold, cfg.flood_connectivity)?;
    finish(flooded, &background_mask(background, cfg), cfg)
}

/// Supervoxels from the regional minima of the membrane map, merged across
/// edges whose mean membrane probability is below `sv_merge_threshold`.
pub fn segment_sv(membrane: &ScalarVolume, background: &ScalarVolume, cfg: &PipelineConfig) -> Result<Segmentation> {
    cfg.validate()?;
    check_maps(&[(membrane, "membrane"), (background, "background")])?;
    let markers = local_minima_markers(membrane, cfg.flood_connectivity);
    let supervoxels = seeded_watershed(membrane, &markers, cfg.flood_connectivity)?;
    let rag = build_rag(&supervoxels, membrane)?;
    log::info!("sv: {} supervoxels, {} edges", rag.nodes().len(), rag.edges().len());
    let mapping = merge_supervoxels(&rag, cfg.sv_merge_threshold);
    let merged = apply_mapping(&supervoxels, &mapping)?;
    finish(merged, &background_mask(background, cfg), cfg)
}

/// Runs `method`. The centroid map is required for [`Method::Sws`] only.
pub fn segment(
    method: Method,
    centroid: Option<&ScalarVolume>,
    membrane: &ScalarVolume,
    background: &ScalarVolume,
    cfg: &PipelineConfig,
) -> Result<Segmentation> {
    match method {
        Method::Sws => {
            let centroid = centroid.ok_or(Error::InvalidParameter {
                name: "centroid",
                reason: "the sws method needs a centroid map".into(),
            })?;
            segment_sws(centroid, membrane, background, cfg)
        }
        Method::Ws => segment_ws(membrane, background, cfg),
        Method::Sv => segment_sv(membrane, background, cfg),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::aggregated_jaccard;
    use crate::phantom::{generate, largest_interface, PhantomConfig};
    use crate::volume::Dims;

    fn phantom_cfg() -> PhantomConfig {
        PhantomConfig {
            dims: Dims::cube(40).unwrap(),
            n_cells: 5,
            semi_axes: [17.0, 17.0, 16.0],
            min_seed_spacing: Some(9.0),
            rng_seed: 3,
            ..Default::default()
        }
    }

    fn small_cfg() -> PipelineConfig {
        PipelineConfig {
            min_background_object: 100,
            ..Default::default()
        }
    }

    #[test]
    fn all_methods_recover_clean_phantom() {
        let p = generate(&phantom_cfg()).unwrap();
        let cfg = small_cfg();
        for m in [Method::Sws, Method::Ws, Method::Sv] {
            let s = segment(m, Some(&p.centroid), &p.membrane, &p.background, &cfg).unwrap();
            assert_eq!(s.instance_count, 5, "{m}");
            let aji = aggregated_jaccard(&p.gt, &s.labels).unwrap();
            assert!(aji >= 0.95, "{m}: {aji}");
        }
    }

    #[test]
    fn sws_labels_hold_one_centroid_each() {
        let p = generate(&phantom_cfg()).unwrap();
        let s = segment_sws(&p.centroid, &p.membrane, &p.background, &small_cfg()).unwrap();
        let mut owners: Vec<u32> = p
            .seeds
            .iter()
            .map(|c| s.labels.get(c[0].round() as usize, c[1].round() as usize, c[2].round() as usize))
            .collect();
        owners.sort();
        owners.dedup();
        assert_eq!(owners.len(), 5);
        assert!(!owners.contains(&0));
    }

    #[test]
    fn dropout_merges_ws_only() {
        let base = generate(&phantom_cfg()).unwrap();
        let pair = largest_interface(&base.gt).unwrap();
        let p = generate(&PhantomConfig {
            dropout_interfaces: vec![pair],
            ..phantom_cfg()
        })
        .unwrap();
        let cfg = small_cfg();
        let ws = segment_ws(&p.membrane, &p.background, &cfg).unwrap();
        let sws = segment_sws(&p.centroid, &p.membrane, &p.background, &cfg).unwrap();
        assert_eq!(ws.instance_count, 4);
        assert_eq!(sws.instance_count, 5);
    }

    #[test]
    fn low_centroid_map_has_no_seeds() {
        let d = Dims::cube(8).unwrap();
        let c = ScalarVolume::filled(d, 0.79);
        let z = ScalarVolume::filled(d, 0.0);
        assert!(matches!(segment_sws(&c, &z, &z, &small_cfg()), Err(Error::NoSeeds)));
        let masks = preprocess_maps(&c, &z, &z, &small_cfg()).unwrap();
        assert_eq!(masks.seeds.count(), 0);
    }

    #[test]
    fn all_background_maps() {
        let d = Dims::cube(12).unwrap();
        let z = ScalarVolume::filled(d, 0.0);
        let one = ScalarVolume::filled(d, 1.0);
        let masks = preprocess_maps(&z, &z, &one, &small_cfg()).unwrap();
        assert_eq!(masks.seeds.count(), 0);
        assert_eq!(masks.background.count(), d.len());
    }

    #[test]
    fn single_cell_without_background() {
        let d = Dims::cube(10).unwrap();
        let centroid = ScalarVolume::from_fn(d, |x, y, z| ((x as i64 - 5).pow(2) + (y as i64 - 5).pow(2) + (z as i64 - 5).pow(2) <= 4) as u8 as f32);
        let z = ScalarVolume::filled(d, 0.0);
        let s = segment_sws(&centroid, &z, &z, &small_cfg()).unwrap();
        assert_eq!(s.instance_count, 1);
        assert!(s.labels.data().iter().all(|&l| l == 1));
    }

    #[test]
    fn uniform_maps_give_one_segment() {
        let d = Dims::cube(6).unwrap();
        let m = ScalarVolume::filled(d, 0.2);
        let bg = ScalarVolume::filled(d, 0.0);
        assert_eq!(segment_ws(&m, &bg, &small_cfg()).unwrap().instance_count, 1);
        assert_eq!(segment_sv(&m, &bg, &small_cfg()).unwrap().instance_count, 1);
    }

    #[test]
    fn rejects_bad_inputs() {
        let d = Dims::cube(4).unwrap();
        let ok = ScalarVolume::filled(d, 0.2);
        let bad = ScalarVolume::filled(d, 1.5);
        assert!(matches!(segment_ws(&bad, &ok, &small_cfg()), Err(Error::NotAProbability { .. })));
        let other = ScalarVolume::filled(Dims::cube(5).unwrap(), 0.0);
        assert!(matches!(segment_ws(&ok, &other, &small_cfg()), Err(Error::DimsMismatch { .. })));
        let cfg = PipelineConfig {
            closing_diameter: 4,
            ..small_cfg()
        };
        assert!(cfg.validate().is_err());
    }
}
