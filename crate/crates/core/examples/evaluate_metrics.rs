//! Score a deliberately flawed prediction and write the report files.
//!
//! cargo run --release --example evaluate_metrics [-- OUTPUT_DIR]

use cellshed::metrics::{centroid_detection, evaluate, EvalOptions};
use cellshed::morphology::{connected_components, Connectivity};
use cellshed::phantom::{generate, largest_interface, PhantomConfig};

fn main() -> cellshed::Result<()> {
    let p = generate(&PhantomConfig::default())?;
    // Merge the two cells sharing the largest face: a classic under-segmentation.
    let (a, b) = largest_interface(&p.gt).expect("cells touch");
    let pred = p.gt.map(|l| if l == b { a } else { l });

    let mut report = evaluate(&p.gt, &pred, &EvalOptions::default())?;
    let centroids = connected_components(&p.centroid.threshold(0.8), Connectivity::Vertex26);
    report.centroid_stats = Some(centroid_detection(&centroids, &p.gt)?);

    println!("cells {a} and {b} merged");
    println!("AJI {:.4}  ADSC {:.4}", report.aji, report.adsc);
    println!(
        "boundary P {:.3}  R {:.3}  F1 {:.3}",
        report.boundary_precision, report.boundary_recall, report.boundary_f1
    );
    let worst = report
        .per_layer
        .iter()
        .min_by(|x, y| x.aji.total_cmp(&y.aji))
        .expect("populated layers");
    println!("worst layer z={} AJI {:.3}", worst.z, worst.aji);

    if let Some(dir) = std::env::args().nth(1) {
        std::fs::create_dir_all(&dir).expect("output dir");
        let dir = std::path::Path::new(&dir);
        report.write_json(dir.join("report.json"))?;
        report.write_layers_csv(dir.join("layers.csv"))?;
        println!("wrote report.json and layers.csv");
    }
    Ok(())
}
