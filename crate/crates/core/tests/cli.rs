use std::path::Path;
use std::process::{Command, Output};

use cellshed::volume::{read_volume, write_volume, Dims, ScalarVolume};

fn cellshed(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cellshed"))
        .args(args)
        .env_remove("CELLSHED_THREADS")
        .output()
        .expect("binary runs")
}

fn json(out: &Output) -> serde_json::Value {
    serde_json::from_slice(&out.stdout).unwrap_or_else(|e| panic!("{e}: {}", String::from_utf8_lossy(&out.stdout)))
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn make_phantom(dir: &Path) {
    let out = cellshed(&[
        "phantom", "-o", s(dir), "--size", "40,40,40", "--cells", "5", "--seed", "3",
        "--semi-axes", "17,17,16", "--min-seed-spacing", "9",
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(json(&out)["instances"], 5);
}

#[test]
fn phantom_segment_evaluate_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    make_phantom(d);
    for f in ["gt.nrrd", "centroid.nrrd", "membrane.nrrd", "background.nrrd", "phantom.json"] {
        assert!(d.join(f).exists(), "{f}");
    }
    let sidecar: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(d.join("phantom.json")).unwrap()).unwrap();
    assert_eq!(sidecar["seeds"].as_array().unwrap().len(), 5);
    assert_eq!(sidecar["config"]["n_cells"], 5);

    for method in ["sws", "ws", "sv"] {
        let labels = d.join(format!("{method}.nrrd"));
        let out = cellshed(&[
            "segment", "--method", method,
            "--centroid", s(&d.join("centroid.nrrd")),
            "--membrane", s(&d.join("membrane.nrrd")),
            "--background", s(&d.join("background.nrrd")),
            "--min-background-object", "100",
            "-o", s(&labels),
        ]);
        assert!(out.status.success(), "{method}: {}", String::from_utf8_lossy(&out.stderr));
        let summary = json(&out);
        assert_eq!(summary["method"], method);
        assert_eq!(summary["instances"], 5, "{method}");
        assert!(summary["wall_time_s"].as_f64().unwrap() >= 0.0);
        if method != "sws" {
            // The background forms its own segment, which gets rejected.
            assert!(summary["rejected_voxels"].as_u64().unwrap() > 0);
        }

        let report = d.join(format!("{method}.json"));
        let layers = d.join(format!("{method}.csv"));
        let out = cellshed(&[
            "evaluate", "--gt", s(&d.join("gt.nrrd")), "--pred", s(&labels),
            "--centroid", s(&d.join("centroid.nrrd")),
            "--background", s(&d.join("background.nrrd")),
            "--json", s(&report), "--csv", s(&layers),
        ]);
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
        let headline = json(&out);
        assert!(headline["aji"].as_f64().unwrap() >= 0.95, "{method}: {headline}");
        let full: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&report).unwrap()).unwrap();
        assert_eq!(full["centroid_stats"]["true_positives"], 5);
        assert_eq!(full["background_mask"]["jaccard"], 1.0);

        let gt = read_volume(d.join("gt.nrrd")).unwrap().into_labels().unwrap();
        let populated = (0..gt.dims().nz)
            .filter(|&z| gt.crop_z(z, z + 1).data().iter().any(|&l| l != 0))
            .count();
        let csv = std::fs::read_to_string(&layers).unwrap();
        let mut lines = csv.lines();
        assert_eq!(lines.next(), Some("z,aji,bf1"));
        assert_eq!(lines.count(), populated);
    }
}

#[test]
fn evaluate_identity_prints_perfect_scores() {
    let dir = tempfile::tempdir().unwrap();
    make_phantom(dir.path());
    let gt = dir.path().join("gt.nrrd");
    let out = cellshed(&["evaluate", "--gt", s(&gt), "--pred", s(&gt)]);
    assert!(out.status.success());
    let v = json(&out);
    assert_eq!(v["aji"], 1.0);
    assert_eq!(v["boundary_f1"], 1.0);
}

#[test]
fn thread_count_does_not_change_output() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    make_phantom(d);
    let mut outputs = Vec::new();
    for threads in ["1", "3"] {
        let path = d.join(format!("t{threads}.nrrd"));
        let out = cellshed(&[
            "--threads", threads, "segment",
            "--centroid", s(&d.join("centroid.nrrd")),
            "--membrane", s(&d.join("membrane.nrrd")),
            "--background", s(&d.join("background.nrrd")),
            "--min-background-object", "100",
            "-o", s(&path),
        ]);
        assert!(out.status.success());
        outputs.push(std::fs::read(path).unwrap());
    }
    assert_eq!(outputs[0], outputs[1]);
}

#[test]
fn usage_and_runtime_errors() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    make_phantom(d);
    let missing_centroid = cellshed(&[
        "segment", "--method", "sws",
        "--membrane", s(&d.join("membrane.nrrd")),
        "--background", s(&d.join("background.nrrd")),
        "-o", s(&d.join("x.nrrd")),
    ]);
    assert_eq!(missing_centroid.status.code(), Some(2));
    assert_eq!(cellshed(&["segment", "--bogus"]).status.code(), Some(2));

    let small = d.join("small.nrrd");
    write_volume(ScalarVolume::filled(Dims::cube(4).unwrap(), 0.0), &small).unwrap();
    let mismatch = cellshed(&["evaluate", "--gt", s(&d.join("gt.nrrd")), "--pred", s(&small)]);
    assert_eq!(mismatch.status.code(), Some(1));

    let dim = d.join("dim.nrrd");
    write_volume(ScalarVolume::filled(Dims::cube(40).unwrap(), 0.79), &dim).unwrap();
    let no_seeds = cellshed(&[
        "segment", "--centroid", s(&dim),
        "--membrane", s(&d.join("membrane.nrrd")),
        "--background", s(&d.join("background.nrrd")),
        "-o", s(&d.join("y.nrrd")),
    ]);
    assert_eq!(no_seeds.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&no_seeds.stderr).contains("no seeds"));

    let unplaceable = cellshed(&["phantom", "-o", s(&d.join("p")), "--size", "8,8,8", "--cells", "40"]);
    assert_eq!(unplaceable.status.code(), Some(1));
}

#[test]
fn loss_reports_classes_and_degenerate_names() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let dims = Dims::new(2, 1, 1).unwrap();
    let truth = d.join("t.nrrd");
    let pred = d.join("p.nrrd");
    let flat = d.join("flat.nrrd");
    write_volume(ScalarVolume::from_vec(dims, vec![1.0, 0.0]).unwrap(), &truth).unwrap();
    write_volume(ScalarVolume::from_vec(dims, vec![0.5, 0.5]).unwrap(), &pred).unwrap();
    write_volume(ScalarVolume::filled(dims, 0.0), &flat).unwrap();

    let out = cellshed(&[
        "loss", "--truth", s(&truth), "--pred", s(&pred), "--truth", s(&truth), "--pred", s(&pred),
        "--names", "membrane,centroid",
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let v = json(&out);
    assert_eq!(v["classes"][1]["name"], "centroid");
    assert!((v["mean"].as_f64().unwrap() - 2f64.ln()).abs() < 1e-12);

    let out = cellshed(&["loss", "--truth", s(&flat), "--pred", s(&pred), "--names", "background"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("background"));

    let out = cellshed(&["loss", "--truth", s(&truth)]);
    assert_eq!(out.status.code(), Some(2));
}
