//! Write and read back each supported voxel type.
//!
//! cargo run --example nrrd_roundtrip

use cellshed::volume::{read_volume, write_volume, BinaryVolume, Dims, LabelVolume, ScalarVolume};

fn main() -> cellshed::Result<()> {
    let dir = std::env::temp_dir().join("cellshed-nrrd-example");
    std::fs::create_dir_all(&dir).map_err(|e| cellshed::Error::Io { path: dir.clone(), source: e })?;
    let dims = Dims::new(5, 4, 3)?;

    let scalar = ScalarVolume::from_fn(dims, |x, y, z| (x + y + z) as f32 / 9.0);
    let mask = scalar.threshold(0.5);
    let labels = LabelVolume::from_fn(dims, |x, _, _| x as u32 * 1_000_000);

    write_volume(scalar.clone(), dir.join("scalar.nrrd"))?;
    write_volume(mask.clone(), dir.join("mask.nrrd"))?;
    write_volume(labels.clone(), dir.join("labels.nrrd"))?;

    let s: ScalarVolume = read_volume(dir.join("scalar.nrrd"))?.into_scalar()?;
    let m: BinaryVolume = read_volume(dir.join("mask.nrrd"))?.into_binary()?;
    let l: LabelVolume = read_volume(dir.join("labels.nrrd"))?.into_labels()?;
    assert!(s == scalar && m == mask && l == labels);

    let header = std::fs::read(dir.join("labels.nrrd")).map_err(|e| cellshed::Error::Io { path: dir.clone(), source: e })?;
    let end = header.windows(2).position(|w| w == b"\n\n").unwrap() + 2;
    print!("{}", String::from_utf8_lossy(&header[..end]));
    println!("{} foreground voxels in the mask; all three volumes round-tripped", m.count());

    // Asking for the wrong kind is an error, not a silent conversion.
    match read_volume(dir.join("labels.nrrd"))?.into_scalar() {
        Err(e) => println!("as float: {e}"),
        Ok(_) => unreachable!(),
    }
    Ok(())
}
