//! Command-line frontend: `segment`, `evaluate`, `phantom` and `loss`.
//!
//! Machine-readable results go to stdout as JSON; logs go to stderr.
//! Exit codes: 0 on success, 1 on runtime or data errors, 2 on usage errors.

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, CommandFactory, Parser, Subcommand};
use serde_json::json;

use crate::error::{Error, Result};
use crate::metrics::{centroid_detection, evaluate, mask_scores, weighted_bce_report, EvalOptions};
use crate::morphology::{connected_components, Connectivity};
use crate::phantom::{generate, PhantomConfig};
use crate::pipeline::{segment, Method, PipelineConfig};
use crate::volume::{read_volume, write_volume, AnyVolume, BinaryVolume, Dims, LabelVolume, ScalarVolume};

#[derive(Debug, Parser)]
#[command(name = "cellshed", version, about = "3D cell instance segmentation from probability volumes")]
pub struct Cli {
    /// Worker threads (default: all cores).
    #[arg(long, global = true, env = "CELLSHED_THREADS")]
    pub threads: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Segment probability maps into labeled cells.
    Segment(SegmentArgs),
    /// Score a labeling against ground truth.
    Evaluate(EvaluateArgs),
    /// Generate a synthetic specimen with known ground truth.
    Phantom(PhantomArgs),
    /// Class-balanced cross entropy of predicted maps.
    Loss(LossArgs),
}

#[derive(Debug, Args)]
pub struct SegmentArgs {
    #[arg(long, value_enum, default_value_t = Method::Sws)]
    pub method: Method,
    /// Centroid probability map (required for sws).
    #[arg(long)]
    pub centroid: Option<PathBuf>,
    #[arg(long)]
    pub membrane: PathBuf,
    #[arg(long)]
    pub background: PathBuf,
    /// Output label volume.
    #[arg(short, long)]
    pub output: PathBuf,
    #[command(flatten)]
    pub config: ConfigArgs,
}

#[derive(Debug, Args)]
pub struct ConfigArgs {
    #[arg(long, default_value_t = 0.5)]
    pub membrane_threshold: f32,
    #[arg(long, default_value_t = 0.5)]
    pub background_threshold: f32,
    #[arg(long, default_value_t = 0.8)]
    pub centroid_threshold: f32,
    #[arg(long, default_value_t = 5)]
    pub closing_diameter: i64,
    #[arg(long, default_value_t = 1000)]
    pub min_background_object: usize,
    #[arg(long, default_value_t = 0.5)]
    pub background_reject_frac: f64,
    #[arg(long, default_value_t = 0.5)]
    pub sv_merge_threshold: f64,
    #[arg(long, value_enum, default_value_t = Connectivity::Vertex26)]
    pub seed_connectivity: Connectivity,
    #[arg(long, value_enum, default_value_t = Connectivity::Vertex26)]
    pub background_connectivity: Connectivity,
    #[arg(long, value_enum, default_value_t = Connectivity::Face6)]
    pub flood_connectivity: Connectivity,
}

impl From<&ConfigArgs> for PipelineConfig {
    fn from(a: &ConfigArgs) -> Self {
        PipelineConfig {
            membrane_threshold: a.membrane_threshold,
            background_threshold: a.background_threshold,
            centroid_threshold: a.centroid_threshold,
            closing_diameter: a.closing_diameter,
            min_background_object: a.min_background_object,
            background_reject_frac: a.background_reject_frac,
            sv_merge_threshold: a.sv_merge_threshold,
            seed_connectivity: a.seed_connectivity,
            background_connectivity: a.background_connectivity,
            flood_connectivity: a.flood_connectivity,
        }
    }
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    /// Ground-truth labels.
    #[arg(long)]
    pub gt: PathBuf,
    /// Predicted labels.
    #[arg(long)]
    pub pred: PathBuf,
    /// Predicted centroids: a probability map (thresholded), a binary mask or
    /// a label volume.
    #[arg(long)]
    pub centroid: Option<PathBuf>,
    #[arg(long, default_value_t = 0.8)]
    pub centroid_threshold: f32,
    /// Predicted background, compared against the GT background as a mask.
    #[arg(long)]
    pub background: Option<PathBuf>,
    #[arg(long, default_value_t = 0.5)]
    pub background_threshold: f32,
    #[arg(long, default_value_t = crate::metrics::BOUNDARY_RADIUS)]
    pub radius: f64,
    #[arg(long, default_value_t = crate::metrics::DEPTH_WINDOW)]
    pub window: usize,
    /// Full report as JSON.
    #[arg(long)]
    pub json: Option<PathBuf>,
    /// Per-layer scores as CSV.
    #[arg(long)]
    pub csv: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct PhantomArgs {
    /// Output directory.
    #[arg(short, long)]
    pub output: PathBuf,
    /// Volume size as NX,NY,NZ.
    #[arg(long, value_parser = parse_triple::<usize>, default_value = "64,64,64")]
    pub size: [usize; 3],
    #[arg(long, default_value_t = 8)]
    pub cells: usize,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    #[arg(long, default_value_t = 1.0)]
    pub membrane_halfwidth: f64,
    /// Ellipsoid semi-axes as A,B,C (default: 27/64 of each dimension).
    #[arg(long, value_parser = parse_triple::<f64>)]
    pub semi_axes: Option<[f64; 3]>,
    #[arg(long, default_value_t = 0.0)]
    pub fade: f64,
    #[arg(long, default_value_t = 0.0)]
    pub noise: f64,
    /// Suppress the membrane between two cells, given as A:B. Repeatable.
    #[arg(long, value_parser = parse_pair)]
    pub dropout: Vec<(u32, u32)>,
    #[arg(long, default_value_t = 0.3)]
    pub dropout_level: f32,
    #[arg(long)]
    pub min_seed_spacing: Option<f64>,
    /// Full configuration as JSON; other phantom flags are ignored.
    #[arg(long)]
    pub config: Option<PathBuf>,
}

fn parse_triple<T: std::str::FromStr>(s: &str) -> std::result::Result<[T; 3], String>
where
    T::Err: std::fmt::Display,
{
    let parts = s
        .split(',')
        .map(|p| p.trim().parse::<T>().map_err(|e| format!("{p:?}: {e}")))
        .collect::<std::result::Result<Vec<T>, String>>()?;
    parts.try_into().map_err(|_| "expected three comma-separated values".to_string())
}

fn parse_pair(s: &str) -> std::result::Result<(u32, u32), String> {
    let (a, b) = s.split_once(':').ok_or("expected A:B")?;
    let a = a.trim().parse().map_err(|e| format!("{e}"))?;
    let b = b.trim().parse().map_err(|e| format!("{e}"))?;
    Ok((a, b))
}

impl PhantomArgs {
    fn to_config(&self) -> Result<PhantomConfig> {
        if let Some(path) = &self.config {
            let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
            return Ok(serde_json::from_str(&text)?);
        }
        let dims = Dims::new(self.size[0], self.size[1], self.size[2])?;
        let semi_axes = match self.semi_axes {
            Some(a) => a,
            None => [dims.nx, dims.ny, dims.nz].map(|n| n as f64 * 27.0 / 64.0),
        };
        Ok(PhantomConfig {
            dims,
            n_cells: self.cells,
            rng_seed: self.seed,
            membrane_halfwidth: self.membrane_halfwidth,
            semi_axes,
            fade: self.fade,
            noise_sigma: self.noise,
            dropout_interfaces: self.dropout.clone(),
            dropout_level: self.dropout_level,
            min_seed_spacing: self.min_seed_spacing,
            ..Default::default()
        })
    }
}

#[derive(Debug, Args)]
pub struct LossArgs {
    /// Truth map of one class (repeat once per class).
    #[arg(long, required = true)]
    pub truth: Vec<PathBuf>,
    /// Predicted map of one class, in the same order as --truth.
    #[arg(long, required = true)]
    pub pred: Vec<PathBuf>,
    /// Comma-separated class names.
    #[arg(long, value_delimiter = ',')]
    pub names: Vec<String>,
}

fn read_scalar(path: &Path) -> Result<ScalarVolume> {
    match read_volume(path)? {
        AnyVolume::Binary(b) => Ok(b.map(|v| v as u8 as f32)),
        other => other.into_scalar(),
    }
}

fn read_labels(path: &Path) -> Result<LabelVolume> {
    match read_volume(path)? {
        AnyVolume::Binary(b) => Ok(b.map(|v| v as u32)),
        other => other.into_labels(),
    }
}

fn read_mask(path: &Path, t: f32) -> Result<BinaryVolume> {
    Ok(match read_volume(path)? {
        AnyVolume::Scalar(s) => s.threshold(t),
        AnyVolume::Binary(b) => b,
        AnyVolume::Label(l) => l.foreground(),
    })
}

fn read_centroids(path: &Path, t: f32) -> Result<LabelVolume> {
    Ok(match read_volume(path)? {
        AnyVolume::Label(l) => l,
        AnyVolume::Scalar(s) => connected_components(&s.threshold(t), Connectivity::Vertex26),
        AnyVolume::Binary(b) => connected_components(&b, Connectivity::Vertex26),
    })
}

fn print_json(value: &serde_json::Value) {
    println!("{}", serde_json::to_string_pretty(value).expect("serializable"));
}

fn cmd_segment(a: &SegmentArgs) -> Result<()> {
    let start = Instant::now();
    let cfg = PipelineConfig::from(&a.config);
    let centroid = a.centroid.as_deref().map(read_scalar).transpose()?;
    let membrane = read_scalar(&a.membrane)?;
    let background = read_scalar(&a.background)?;
    log::info!("segmenting {} volume with {}", membrane.dims(), a.method);
    let seg = segment(a.method, centroid.as_ref(), &membrane, &background, &cfg)?;
    write_volume(seg.labels, &a.output)?;
    print_json(&json!({
        "method": a.method,
        "instances": seg.instance_count,
        "rejected_voxels": seg.rejected_voxels,
        "wall_time_s": start.elapsed().as_secs_f64(),
    }));
    Ok(())
}

fn cmd_evaluate(a: &EvaluateArgs) -> Result<()> {
    let gt = read_labels(&a.gt)?;
    let pred = read_labels(&a.pred)?;
    let opts = EvalOptions {
        boundary_radius: a.radius,
        depth_window: a.window,
    };
    let mut report = evaluate(&gt, &pred, &opts)?;
    if let Some(path) = &a.centroid {
        report.centroid_stats = Some(centroid_detection(&read_centroids(path, a.centroid_threshold)?, &gt)?);
    }
    if let Some(path) = &a.background {
        let bg = read_mask(path, a.background_threshold)?;
        report.background_mask = Some(mask_scores(&bg, &gt.map(|l| l == 0))?);
    }
    if let Some(path) = &a.json {
        report.write_json(path)?;
    }
    if let Some(path) = &a.csv {
        report.write_layers_csv(path)?;
    }
    print_json(&json!({
        "aji": report.aji,
        "adsc": report.adsc,
        "boundary_precision": report.boundary_precision,
        "boundary_recall": report.boundary_recall,
        "boundary_f1": report.boundary_f1,
    }));
    Ok(())
}

fn cmd_phantom(a: &PhantomArgs) -> Result<()> {
    let cfg = a.to_config()?;
    let p = generate(&cfg)?;
    p.write_to(&a.output, &cfg)?;
    print_json(&json!({
        "output": a.output,
        "dims": cfg.dims,
        "instances": p.gt.instance_count(),
    }));
    Ok(())
}

fn cmd_loss(a: &LossArgs) -> Result<()> {
    let names: Vec<String> = if a.names.is_empty() {
        (0..a.truth.len()).map(|i| format!("class{i}")).collect()
    } else {
        a.names.clone()
    };
    let truth = a.truth.iter().map(|p| read_scalar(p)).collect::<Result<Vec<_>>>()?;
    let pred = a.pred.iter().map(|p| read_scalar(p)).collect::<Result<Vec<_>>>()?;
    let report = weighted_bce_report(&names, &truth, &pred)?;
    print_json(&serde_json::to_value(&report)?);
    Ok(())
}

fn usage_error(message: &str) -> ExitCode {
    let err = Cli::command().error(clap::error::ErrorKind::MissingRequiredArgument, message);
    let _ = err.print();
    ExitCode::from(2)
}

/// Parses `args` (including the program name) and runs the command.
pub fn run<I, T>(args: I) -> ExitCode
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn"))
        .target(env_logger::Target::Stderr)
        .try_init();

    if let Some(n) = cli.threads {
        if n == 0 {
            return usage_error("--threads must be at least 1");
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            log::warn!("thread pool already initialized: {e}");
        }
    }

    let result = match &cli.command {
        Command::Segment(a) => {
            if a.method == Method::Sws && a.centroid.is_none() {
                return usage_error("--centroid is required for --method sws");
            }
            cmd_segment(a)
        }
        Command::Evaluate(a) => cmd_evaluate(a),
        Command::Phantom(a) => cmd_phantom(a),
        Command::Loss(a) => {
            if a.truth.len() != a.pred.len() {
                return usage_error("--truth and --pred must be given the same number of times");
            }
            if !a.names.is_empty() && a.names.len() != a.truth.len() {
                return usage_error("--names must list one name per class");
            }
            cmd_loss(a)
        }
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}

/// Entry point used by the `cellshed` binary.
pub fn main() -> ExitCode {
    run(std::env::args_os())
}
