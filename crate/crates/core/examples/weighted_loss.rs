//! Class-balanced cross entropy on a tiny three-class patch.
//!
//! cargo run --example weighted_loss

use cellshed::metrics::loss::class_loss_gradient;
use cellshed::metrics::weighted_bce_report;
use cellshed::volume::{Dims, ScalarVolume};

fn main() -> cellshed::Result<()> {
    let dims = Dims::new(8, 8, 1)?;
    let centroid = ScalarVolume::from_fn(dims, |x, y, _| ((3..5).contains(&x) && (3..5).contains(&y)) as u8 as f32);
    let membrane = ScalarVolume::from_fn(dims, |x, y, _| (x == 0 || y == 0 || x == 7 || y == 7) as u8 as f32);
    let background = ScalarVolume::from_fn(dims, |x, _, _| (x == 0) as u8 as f32);
    let blur = |t: &ScalarVolume| t.map(|v| 0.15 + 0.7 * v);

    let names = ["centroid", "membrane", "background"].map(String::from);
    let truth = [centroid, membrane, background];
    let pred = truth.clone().map(|t| blur(&t));
    let report = weighted_bce_report(&names, &truth, &pred)?;
    for c in &report.classes {
        println!("{:<10} loss {:.4}  w_fg {:.4}  w_bg {:.4}", c.name, c.loss, c.w_fg, c.w_bg);
    }
    println!("mean       {:.4}", report.mean);

    let t: Vec<f64> = truth[0].data().iter().map(|&v| v as f64).collect();
    let p: Vec<f64> = pred[0].data().iter().map(|&v| v as f64).collect();
    let g = class_loss_gradient("centroid", &t, &p)?;
    println!("d loss / d p at a centroid voxel: {:+.5}, at a background voxel: {:+.5}", g[27], g[0]);
    Ok(())
}
