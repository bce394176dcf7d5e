//! Over-segment a membrane map into supervoxels, then merge across weak edges.
//!
//! cargo run --release --example supervoxel_merge

use cellshed::morphology::Connectivity;
use cellshed::phantom::{generate, PhantomConfig};
use cellshed::supervoxel::{agglomerate, apply_mapping, build_rag};
use cellshed::volume::Dims;
use cellshed::watershed::{local_minima_markers, seeded_watershed};

fn main() -> cellshed::Result<()> {
    let cfg = PhantomConfig {
        dims: Dims::cube(48).unwrap(),
        n_cells: 6,
        semi_axes: [20.0, 20.0, 20.0],
        min_seed_spacing: Some(10.0),
        noise_sigma: 0.08,
        ..Default::default()
    };
    let p = generate(&cfg)?;
    let markers = local_minima_markers(&p.membrane, Connectivity::Face6);
    let supervoxels = seeded_watershed(&p.membrane, &markers, Connectivity::Face6)?;
    let rag = build_rag(&supervoxels, &p.membrane)?;
    println!("{} supervoxels, {} adjacencies", rag.nodes().len(), rag.edges().len());

    let merged = agglomerate(&rag, 0.5);
    for m in merged.merges.iter().take(5) {
        println!("  merge {} <- {} at mean boundary {:.3}", m.kept, m.absorbed, m.average);
    }
    println!("  ... {} merges in total", merged.merges.len());
    let labels = apply_mapping(&supervoxels, &merged.mapping)?;
    println!("{} regions left (including the background)", labels.instance_count());
    let weakest = merged.graph.edges().values().map(|e| e.average()).fold(f64::INFINITY, f64::min);
    println!("weakest remaining boundary: {weakest:.3}");
    Ok(())
}
