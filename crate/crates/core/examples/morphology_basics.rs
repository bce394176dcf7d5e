//! Seed preparation step by step: threshold, close, cut membranes out, label.
//!
//! cargo run --example morphology_basics

use cellshed::morphology::{ball_element, closing, connected_components, mask_subtract, Connectivity};
use cellshed::volume::{BinaryVolume, Dims};

fn main() -> cellshed::Result<()> {
    let dims = Dims::cube(20)?;
    let se = ball_element(5)?;
    println!("ball of diameter 5: {} offsets", se.len());

    // Two ragged blobs, each missing its middle slice.
    let blob = |x: usize, y: usize, z: usize, c: [usize; 3]| {
        let d2 = (x as i64 - c[0] as i64).pow(2) + (y as i64 - c[1] as i64).pow(2) + (z as i64 - c[2] as i64).pow(2);
        d2 <= 9 && z != c[2]
    };
    let seeds = BinaryVolume::from_fn(dims, |x, y, z| blob(x, y, z, [5, 5, 10]) || blob(x, y, z, [14, 14, 10]));
    let before = connected_components(&seeds, Connectivity::Face6).instance_count();
    let closed = closing(&seeds, &se);
    let after = connected_components(&closed, Connectivity::Face6).instance_count();
    println!("face-connected pieces: {before} before closing, {after} after");

    // A membrane plane cuts the first blob in half.
    let membrane = BinaryVolume::from_fn(dims, |x, _, _| x == 5);
    let cut = mask_subtract(&closed, &membrane)?;
    for conn in [Connectivity::Face6, Connectivity::Vertex26] {
        println!("{conn:?} components after the cut: {}", connected_components(&cut, conn).instance_count());
    }
    Ok(())
}
