use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use serde_json::json;

use dualview_core::anchors::{anchor_coverage, kmeans_best_of, AnchorConfig, BoxDims, Coverage};
use dualview_core::dataset::{load_annotations, load_detections, save_detections, split_dataset};
use dualview_core::dataset::{GroupBy, SplitFractions};
use dualview_core::detector::{BaselineDetector, Detector, RecordedDetector};
use dualview_core::metrics::{format_significant, DEFAULT_MATCH_IOU};
use dualview_core::multiview::EvalMode;
use dualview_core::pipeline::{detect_all, evaluate, run_pipeline, with_jobs, DEFAULT_LATENCY_BUDGET};
use dualview_core::plot::{parse_pr_csv, plot_dims, plot_pr, PrSeries};
use dualview_core::synth::{generate_dataset, GeneratorConfig, Physics, PhysicsConfig};
use dualview_core::ClassId;

/// Detection evaluation toolkit for dual-view X-ray baggage scans.
#[derive(Parser)]
#[command(name = "dualview", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Render a synthetic dual-view dataset with annotations.
    Generate(GenerateArgs),
    /// Split annotated bag-scans into train, validation and test sets.
    Split(SplitArgs),
    /// Run the baseline detector over annotated views.
    Detect(DetectArgs),
    /// Score detections per class in single-view and fused modes.
    Evaluate(EvaluateArgs),
    /// Cluster ground-truth box shapes into anchor priors.
    Anchors(AnchorsArgs),
    /// Draw PR curves from CSV files.
    Plot(PlotArgs),
    /// Time the detector scan by scan against a latency budget.
    Bench(BenchArgs),
}

#[derive(clap::Args)]
struct GenerateArgs {
    #[arg(long)]
    n: usize,
    #[arg(long, env = "DUALVIEW_SEED", default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 0.9)]
    threat_prob: f64,
    #[arg(long)]
    out_dir: PathBuf,
    #[arg(long, default_value_t = 1.0)]
    resolution_mm: f64,
    #[arg(long, default_value_t = 8)]
    max_clutter: usize,
    /// Class probabilities for sharps,blunts,firearms,lags.
    #[arg(long, value_delimiter = ',', num_args = 4, default_values_t = [0.25, 0.25, 0.25, 0.25])]
    threat_mix: Vec<f64>,
    /// Consecutive scans of the same bag in new poses.
    #[arg(long, default_value_t = 1)]
    scans_per_bag: usize,
    /// Physics table overriding the bundled one.
    #[arg(long)]
    physics: Option<PathBuf>,
    #[arg(long)]
    jobs: Option<usize>,
}

#[derive(Clone, Copy, ValueEnum)]
enum GroupByArg {
    Bag,
    BagScan,
}

#[derive(clap::Args)]
struct SplitArgs {
    #[arg(long)]
    annotations: PathBuf,
    #[arg(long, value_delimiter = ',', num_args = 3, default_values_t = [0.7, 0.1, 0.2])]
    fractions: Vec<f64>,
    #[arg(long, env = "DUALVIEW_SEED", default_value_t = 0)]
    seed: u64,
    #[arg(long, value_enum, default_value_t = GroupByArg::BagScan)]
    group_by: GroupByArg,
    /// Output JSON file; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(clap::Args)]
struct DetectArgs {
    #[arg(long)]
    annotations: PathBuf,
    /// Image directory; defaults to the annotation file's directory.
    #[arg(long)]
    images: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
    /// Only detections scoring above this are kept.
    #[arg(long)]
    display_threshold: f64,
    #[arg(long)]
    jobs: Option<usize>,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Single,
    Fused,
    Both,
}

#[derive(clap::Args)]
struct EvaluateArgs {
    #[arg(long)]
    annotations: PathBuf,
    #[arg(long)]
    detections: PathBuf,
    #[arg(long, value_enum, default_value_t = ModeArg::Both)]
    mode: ModeArg,
    #[arg(long, default_value_t = DEFAULT_MATCH_IOU)]
    iou: f64,
    #[arg(long)]
    out_dir: PathBuf,
}

#[derive(clap::Args)]
struct AnchorsArgs {
    #[arg(long)]
    annotations: PathBuf,
    #[arg(long, default_value_t = 9)]
    k: usize,
    /// Restarts; the best mean IoU wins.
    #[arg(long, default_value_t = 10)]
    restarts: u64,
    #[arg(long, env = "DUALVIEW_SEED", default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out_dir: PathBuf,
    /// Also write a width/height scatter with the centroids.
    #[arg(long)]
    scatter: bool,
}

#[derive(clap::Args)]
struct PlotArgs {
    /// CSV files named `pr_<class>.csv`.
    #[arg(required = true)]
    inputs: Vec<PathBuf>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(clap::Args)]
struct BenchArgs {
    #[arg(long)]
    annotations: PathBuf,
    #[arg(long)]
    images: Option<PathBuf>,
    #[arg(long)]
    display_threshold: f64,
    #[arg(long, default_value_t = DEFAULT_LATENCY_BUDGET)]
    budget: f64,
    /// Replay recorded detections instead of running the baseline.
    #[arg(long)]
    detections: Option<PathBuf>,
    /// Report file; printed to stdout as well.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn parent_dir(path: &Path) -> PathBuf {
    path.parent()
        .filter(|p| !p.as_os_str().is_empty())
        .map_or_else(|| PathBuf::from("."), Path::to_path_buf)
}

fn write_file(path: &Path, contents: impl AsRef<[u8]>) -> Result<()> {
    if let Some(dir) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    fs::write(path, contents).with_context(|| format!("writing {}", path.display()))
}

fn generate(args: GenerateArgs) -> Result<()> {
    let physics = match &args.physics {
        Some(p) => Physics::new(PhysicsConfig::from_file(p)?)?,
        None => Physics::default(),
    };
    let config = GeneratorConfig {
        n_scans: args.n,
        seed: args.seed,
        threat_prob: args.threat_prob,
        threat_mix: args.threat_mix[..].try_into().context("threat mix needs 4 values")?,
        max_clutter: args.max_clutter,
        resolution_mm: args.resolution_mm,
        scans_per_bag: args.scans_per_bag,
        jobs: args.jobs,
    };
    let annos = generate_dataset(&config, &physics, &args.out_dir)?;
    let threats: usize = annos.iter().map(|a| a.objects.len()).sum();
    println!(
        "wrote {} views ({} threat boxes) to {}",
        annos.len(),
        threats,
        args.out_dir.display()
    );
    Ok(())
}

fn split(args: SplitArgs) -> Result<()> {
    let annos = load_annotations(&args.annotations)?;
    let [train, validation, test] = args.fractions[..] else {
        bail!("fractions need 3 values");
    };
    let group_by = match args.group_by {
        GroupByArg::Bag => GroupBy::Bag,
        GroupByArg::BagScan => GroupBy::BagScan,
    };
    let fractions = SplitFractions {
        train,
        validation,
        test,
    };
    let split = split_dataset(&annos, fractions, args.seed, group_by)?;
    let text = serde_json::to_string_pretty(&split)? + "\n";
    match &args.out {
        Some(p) => write_file(p, text)?,
        None => print!("{text}"),
    }
    Ok(())
}

fn detect(args: DetectArgs) -> Result<()> {
    let annos = load_annotations(&args.annotations)?;
    let images = args.images.unwrap_or_else(|| parent_dir(&args.annotations));
    let detector = BaselineDetector::default();
    let (dets, errors) = with_jobs(args.jobs, || {
        detect_all(&annos, &images, &detector, args.display_threshold)
    })??;
    for e in &errors {
        log::error!("{} {}: {}", e.scan_id, e.view, e.message);
    }
    save_detections(&annos, &dets, &args.out)?;
    println!("wrote {} detections for {} views to {}", dets.len(), annos.len(), args.out.display());
    if !errors.is_empty() {
        bail!(dualview_core::Error::io(
            &images,
            std::io::Error::other(format!("{} views could not be read", errors.len()))
        ));
    }
    Ok(())
}

fn run_evaluate(args: EvaluateArgs) -> Result<()> {
    let annos = load_annotations(&args.annotations)?;
    let dets = load_detections(&args.detections)?;
    let modes: &[EvalMode] = match args.mode {
        ModeArg::Single => &[EvalMode::Single],
        ModeArg::Fused => &[EvalMode::Fused],
        ModeArg::Both => &[EvalMode::Single, EvalMode::Fused],
    };
    let eval = evaluate(&annos, &dets, modes, args.iou)?;
    for c in &eval.omitted {
        eprintln!("warning: no ground truth for {c}; omitted from the table and mAP");
    }
    print!("{}", eval.table());
    eval.write_outputs(&args.out_dir)?;
    Ok(())
}

fn coverage_json(c: &Coverage) -> serde_json::Value {
    json!({
        "mean_iou": c.mean,
        "min_iou": c.min,
        "fraction_above_half": c.fraction_above_half,
    })
}

fn anchors(args: AnchorsArgs) -> Result<()> {
    let annos = load_annotations(&args.annotations)?;
    let dims: Vec<BoxDims> = annos
        .iter()
        .flat_map(|a| a.objects.iter().map(|o| BoxDims::from(&o.bbox)))
        .collect();
    if dims.is_empty() {
        bail!(dualview_core::Error::EmptyInput("no ground-truth boxes to cluster"));
    }
    let seeds = (0..args.restarts).map(|i| args.seed.wrapping_add(i));
    let result = kmeans_best_of(&dims, args.k, seeds)?;
    let fitted = anchor_coverage(&result.centroids, &dims)?;
    let defaults = anchor_coverage(&AnchorConfig::natural_image().dims(), &dims)?;

    let mut csv = String::from("w,h\n");
    for c in &result.centroids {
        csv += &format!("{},{}\n", format_significant(c.w, 9), format_significant(c.h, 9));
    }
    write_file(&args.out_dir.join("centroids.csv"), csv)?;
    let report = json!({
        "boxes": dims.len(),
        "k": args.k,
        "iterations": result.iterations,
        "kmeans": coverage_json(&fitted),
        "natural_image_defaults": coverage_json(&defaults),
    });
    write_file(
        &args.out_dir.join("coverage.json"),
        serde_json::to_string_pretty(&report)? + "\n",
    )?;
    if args.scatter {
        write_file(&args.out_dir.join("anchors.svg"), plot_dims(&dims, &result.centroids)?)?;
    }
    println!(
        "k={} mean IoU {:.4} (natural-image defaults {:.4})",
        args.k, fitted.mean, defaults.mean
    );
    Ok(())
}

fn plot(args: PlotArgs) -> Result<()> {
    let mut curves = Vec::new();
    for path in &args.inputs {
        let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or_default();
        let class_id = stem
            .strip_prefix("pr_")
            .and_then(ClassId::parse)
            .with_context(|| format!("{}: expected a file named pr_<class>.csv", path.display()))?;
        let text = fs::read_to_string(path)
            .map_err(|e| dualview_core::Error::io(path, e))
            .with_context(|| format!("reading {}", path.display()))?;
        for (mode, curve) in parse_pr_csv(&text, class_id)? {
            let label = match mode {
                Some(m) => format!("{class_id} ({})", m.as_str()),
                None => class_id.to_string(),
            };
            curves.push((label, curve));
        }
    }
    let series: Vec<PrSeries> = curves
        .iter()
        .map(|(label, curve)| PrSeries {
            label: label.clone(),
            curve,
        })
        .collect();
    write_file(&args.out, plot_pr(&series)?)?;
    Ok(())
}

fn bench(args: BenchArgs) -> Result<()> {
    let annos = load_annotations(&args.annotations)?;
    let images = args.images.unwrap_or_else(|| parent_dir(&args.annotations));
    let detector: Box<dyn Detector> = match &args.detections {
        Some(p) => Box::new(RecordedDetector::from_file(p)?),
        None => Box::new(BaselineDetector::default()),
    };
    let out = run_pipeline(&annos, &images, detector.as_ref(), args.display_threshold, args.budget)?;
    for e in &out.errors {
        log::error!("{} {}: {}", e.scan_id, e.view, e.message);
    }
    let report = json!({
        "detector": detector.name(),
        "detections": out.detections.len(),
        "errors": out.errors,
        "latency": out.report,
    });
    let text = serde_json::to_string_pretty(&report)? + "\n";
    if let Some(p) = &args.out {
        write_file(p, &text)?;
    }
    print!("{text}");
    Ok(())
}

/// 2 for filesystem failures, 1 for everything else.
fn exit_code(err: &anyhow::Error) -> u8 {
    let io = err.chain().any(|cause| {
        cause.downcast_ref::<std::io::Error>().is_some()
            || cause
                .downcast_ref::<dualview_core::Error>()
                .is_some_and(dualview_core::Error::is_io)
    });
    if io {
        2
    } else {
        1
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    let result = match cli.command {
        Command::Generate(a) => generate(a),
        Command::Split(a) => split(a),
        Command::Detect(a) => detect(a),
        Command::Evaluate(a) => run_evaluate(a),
        Command::Anchors(a) => anchors(a),
        Command::Plot(a) => plot(a),
        Command::Bench(a) => bench(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
