//! Where each strategy breaks: a faded membrane patch merges two cells under
//! plain watershed, and a bright streak inside a cell splits it under
//! supervoxel merging. Seeded watershed survives both.
//!
//! cargo run --release --example compare_strategies

use cellshed::metrics::aggregated_jaccard;
use cellshed::morphology::{connected_components, Connectivity};
use cellshed::phantom::{cell_interfaces, generate, InteriorRidge, Phantom, PhantomConfig};
use cellshed::pipeline::{segment, Method, PipelineConfig};

fn report(title: &str, p: &Phantom) -> cellshed::Result<()> {
    println!("{title}");
    for method in [Method::Sws, Method::Ws, Method::Sv] {
        let s = segment(method, Some(&p.centroid), &p.membrane, &p.background, &PipelineConfig::default())?;
        println!("  {method:>3}: {} instances, AJI {:.3}", s.instance_count, aggregated_jaccard(&p.gt, &s.labels)?);
    }
    Ok(())
}

fn main() -> cellshed::Result<()> {
    let cfg = PhantomConfig::default();
    let clean = generate(&cfg)?;
    report("clean", &clean)?;

    // Smallest interface whose removal actually joins the two cells.
    let mut pairs: Vec<_> = cell_interfaces(&clean.gt).into_iter().collect();
    pairs.sort_by_key(|&(k, n)| (n, k));
    for (pair, faces) in pairs {
        let p = generate(&PhantomConfig { dropout_interfaces: vec![pair], ..cfg.clone() })?;
        let open = connected_components(&p.membrane.below(0.5), Connectivity::Face6);
        let at = |l: u32| {
            let s = p.seeds[l as usize - 1].map(|v| v.round() as usize);
            open.get(s[0], s[1], s[2])
        };
        if at(pair.0) == at(pair.1) {
            report(&format!("membrane between cells {} and {} faded ({faces} faces)", pair.0, pair.1), &p)?;
            break;
        }
    }

    let ridge = InteriorRidge { cell: 1, normal: [1.0, 0.0, 0.0], offset: 4.5, value: 0.9, width: 2.0 };
    let p = generate(&PhantomConfig { interior_ridges: vec![ridge], ..cfg })?;
    report("bright streak inside cell 1", &p)
}
