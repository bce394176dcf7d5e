//! Build the flooding landscape for two cells separated by a membrane and
//! print a profile through both.
//!
//! cargo run --example distance_landscape

use cellshed::distance::{build_landscape, edt};
use cellshed::volume::{BinaryVolume, Dims, ScalarVolume};

fn main() -> cellshed::Result<()> {
    let dims = Dims::new(21, 9, 9)?;
    // Walls at x = 0, 10, 20 plus the y/z faces of the box.
    let wall = BinaryVolume::from_fn(dims, |x, y, z| x % 10 == 0 || y == 0 || y == 8 || z == 0 || z == 8);
    let prob = ScalarVolume::from_fn(dims, |x, y, z| if wall.get(x, y, z) { 0.95 } else { 0.05 });
    let no_background = BinaryVolume::filled(dims, false);

    let dist = edt(&wall);
    let land = build_landscape(&prob, &wall, &no_background)?;
    println!(" x  edt    landscape");
    for x in 0..dims.nx {
        println!("{x:>2}  {:.3}  {:+.3}", dist.get(x, 4, 4), land.get(x, 4, 4));
    }
    Ok(())
}
