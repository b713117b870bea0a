//! `croprow` command-line tool.
//!
//! Exit status: 0 success, 1 usage or configuration error, 2 some samples
//! failed to evaluate, 3 fatal I/O or decode error.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use croprow::baseline::{classic_detect, BaselineConfig};
use croprow::harness::{
    emit_report, evaluate_dataset, load_manifest, parse_report_json, EvalOptions, ManifestError, PredictionSource,
    ReportFormat, RunReport, GLOBAL_SIZE,
};
use croprow::imagecore::{binarize, encode_mask, encode_rgb_ppm, overlay_rows, read_image};
use croprow::rowcluster::{detect_rows, CropRow, PipelineConfig};
use croprow::synthgen::{render_gt_mask, render_mask, render_rgb, SceneSpec};
use serde::Serialize;

const OVERLAY_COLOR: [u8; 3] = [255, 0, 0];

#[derive(Parser)]
#[command(name = "croprow", version, about = "Crop row extraction and angle-error evaluation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Evaluate predicted masks against ground truth listed in a manifest
    Eval(EvalArgs),
    /// Detect crop rows in a single mask
    Detect(DetectArgs),
    /// Run the excess-green baseline on RGB images or a manifest
    Baseline(BaselineArgs),
    /// Render a synthetic scene from a JSON spec
    Synth(SynthArgs),
    /// Re-render a JSON run report in another format
    Report(ReportArgs),
}

/// Pipeline settings. Each flag overrides the matching field of `--config`.
#[derive(Args, Default)]
struct PipelineFlags {
    /// JSON file with pipeline settings; unspecified fields keep defaults
    #[arg(long, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Hough θ bin width, degrees (must divide 180)
    #[arg(long)]
    theta_res: Option<f64>,
    /// Hough ρ bin width, pixels
    #[arg(long)]
    rho_res: Option<f64>,
    /// Minimum votes for a Hough peak
    #[arg(long)]
    vote_threshold: Option<u32>,
    /// Non-maximum suppression radius in θ bins
    #[arg(long)]
    nms_theta: Option<usize>,
    /// Non-maximum suppression radius in ρ bins
    #[arg(long)]
    nms_rho: Option<usize>,
    /// Angle clustering radius within one image, degrees
    #[arg(long)]
    eps1: Option<f64>,
    /// Radius for pairing ground-truth and predicted angles, degrees
    #[arg(long)]
    eps2: Option<f64>,
    /// DBSCAN minimum neighbourhood size, self included
    #[arg(long)]
    min_pts: Option<usize>,
    /// Thinning iteration cap
    #[arg(long)]
    max_thin_iterations: Option<usize>,
}

impl PipelineFlags {
    fn apply(&self, mut cfg: PipelineConfig) -> PipelineConfig {
        macro_rules! set {
            ($($f:ident),*) => { $(if let Some(v) = self.$f { cfg.$f = v; })* };
        }
        set!(theta_res, rho_res, vote_threshold, eps1, eps2, min_pts, max_thin_iterations);
        if let Some(t) = self.nms_theta {
            cfg.nms_radius.0 = t;
        }
        if let Some(r) = self.nms_rho {
            cfg.nms_radius.1 = r;
        }
        cfg
    }

    fn resolve(&self) -> Result<PipelineConfig, CliError> {
        let base = match &self.config {
            Some(path) => parse_json(path)?,
            None => PipelineConfig::default(),
        };
        let cfg = self.apply(base);
        cfg.validate().map_err(|e| CliError::Usage(e.to_string()))?;
        Ok(cfg)
    }
}

#[derive(Args)]
struct OutputFlags {
    /// csv, json or markdown
    #[arg(long, default_value = "csv")]
    format: ReportFormat,
    /// Write here instead of stdout
    #[arg(long, short, value_name = "FILE")]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct EvalArgs {
    /// CSV manifest with header image,gt_mask,pred_mask,category
    #[arg(long, short)]
    manifest: PathBuf,
    /// Worker threads (0 = one per core)
    #[arg(long, default_value_t = 0)]
    workers: usize,
    /// Resize every mask to 512x512 before scoring
    #[arg(long)]
    global: bool,
    #[command(flatten)]
    pipeline: PipelineFlags,
    #[command(flatten)]
    output: OutputFlags,
}

#[derive(Args)]
struct DetectArgs {
    /// Binary mask (PGM or PNG); pixels >= 128 are white
    mask: PathBuf,
    /// Draw detected rows and write a PPM here
    #[arg(long, value_name = "FILE")]
    overlay: Option<PathBuf>,
    /// Background for --overlay; defaults to the mask itself
    #[arg(long, value_name = "FILE")]
    image: Option<PathBuf>,
    #[command(flatten)]
    pipeline: PipelineFlags,
}

#[derive(Args)]
struct BaselineArgs {
    /// RGB images to run the detector on
    images: Vec<PathBuf>,
    /// Evaluate the baseline on a manifest's image column instead
    #[arg(long, short, conflicts_with = "images")]
    manifest: Option<PathBuf>,
    /// JSON file with baseline settings, including `row_pipeline`
    #[arg(long, value_name = "FILE")]
    baseline_config: Option<PathBuf>,
    /// Use --fixed-threshold instead of Otsu
    #[arg(long)]
    no_otsu: bool,
    /// Inclusive ExG threshold when Otsu is off
    #[arg(long)]
    fixed_threshold: Option<u8>,
    /// Opening radius; 0 disables the opening
    #[arg(long)]
    open_radius: Option<usize>,
    #[arg(long, default_value_t = 0)]
    workers: usize,
    #[arg(long)]
    global: bool,
    #[command(flatten)]
    pipeline: PipelineFlags,
    #[command(flatten)]
    output: OutputFlags,
}

#[derive(Args)]
struct SynthArgs {
    /// Scene spec JSON
    spec: PathBuf,
    /// Mask with rows and speckle (PGM)
    #[arg(long, value_name = "FILE")]
    mask_out: Option<PathBuf>,
    /// Ground-truth mask, rows only (PGM)
    #[arg(long, value_name = "FILE")]
    gt_out: Option<PathBuf>,
    /// Color rendering (PPM)
    #[arg(long, value_name = "FILE")]
    rgb_out: Option<PathBuf>,
    #[arg(long, value_parser = parse_color, default_value = "60,150,50")]
    crop_color: [u8; 3],
    #[arg(long, value_parser = parse_color, default_value = "130,95,60")]
    soil_color: [u8; 3],
}

#[derive(Args)]
struct ReportArgs {
    /// JSON report written by `eval --format json`
    input: PathBuf,
    #[command(flatten)]
    output: OutputFlags,
}

#[derive(Debug)]
enum CliError {
    Usage(String),
    Io(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Io(_) => 3,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(m) | CliError::Io(m) => f.write_str(m),
        }
    }
}

fn parse_color(s: &str) -> Result<[u8; 3], String> {
    let parts: Vec<&str> = s.split(',').collect();
    let [r, g, b] = parts.as_slice() else {
        return Err(format!("expected R,G,B, got {s:?}"));
    };
    let c = |v: &str| v.trim().parse::<u8>().map_err(|e| format!("{v:?}: {e}"));
    Ok([c(r)?, c(g)?, c(b)?])
}

fn read(path: &Path) -> Result<Vec<u8>, CliError> {
    fs::read(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

fn parse_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T, CliError> {
    serde_json::from_slice(&read(path)?).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))
}

fn write_out(path: Option<&Path>, bytes: &[u8]) -> Result<(), CliError> {
    match path {
        Some(p) => fs::write(p, bytes).map_err(|e| CliError::Io(format!("{}: {e}", p.display()))),
        None => std::io::stdout().write_all(bytes).map_err(|e| CliError::Io(format!("stdout: {e}"))),
    }
}

fn manifest_error(e: ManifestError) -> CliError {
    match e {
        ManifestError::Open { .. } | ManifestError::Unreadable { .. } => CliError::Io(e.to_string()),
        _ => CliError::Usage(e.to_string()),
    }
}

/// Emits the report; partial failures turn into exit status 2.
fn finish_report(report: &RunReport, output: &OutputFlags) -> Result<u8, CliError> {
    write_out(output.out.as_deref(), &emit_report(report, output.format))?;
    for f in &report.failures {
        eprintln!("row {}: {} ({})", f.row, f.reason, f.gt_mask);
    }
    Ok(if report.failures.is_empty() { 0 } else { 2 })
}

fn run_eval(args: EvalArgs) -> Result<u8, CliError> {
    let cfg = args.pipeline.resolve()?;
    let samples = load_manifest(&args.manifest).map_err(manifest_error)?;
    let options = EvalOptions {
        workers: args.workers,
        resize: args.global.then_some(GLOBAL_SIZE),
        source: PredictionSource::MaskFile,
    };
    let report = evaluate_dataset(&samples, &cfg, &options).map_err(|e| CliError::Usage(e.to_string()))?;
    finish_report(&report, &args.output)
}

fn run_detect(args: DetectArgs) -> Result<u8, CliError> {
    let cfg = args.pipeline.resolve()?;
    let decode = |p: &Path| read_image(p).map_err(|e| CliError::Io(e.to_string()));
    let mask = binarize(&decode(&args.mask)?.into_gray(), 128);
    let rows = detect_rows(&mask, &cfg).map_err(|e| CliError::Usage(e.to_string()))?;
    if let Some(path) = &args.overlay {
        let background = match &args.image {
            Some(p) => decode(p)?.into_rgb(),
            None => mask.to_gray().to_rgb(),
        };
        if background.dimensions() != mask.dimensions() {
            return Err(CliError::Usage(format!(
                "--image is {:?} but the mask is {:?}",
                background.dimensions(),
                mask.dimensions()
            )));
        }
        write_out(Some(path), &encode_rgb_ppm(&overlay_rows(&background, &rows, OVERLAY_COLOR)))?;
    }
    print_json(&rows)?;
    Ok(0)
}

#[derive(Serialize)]
struct ImageRows<'a> {
    image: String,
    rows: &'a [CropRow],
}

fn run_baseline(args: BaselineArgs) -> Result<u8, CliError> {
    let mut cfg: BaselineConfig = match &args.baseline_config {
        Some(p) => parse_json(p)?,
        None => BaselineConfig::default(),
    };
    if let Some(p) = &args.pipeline.config {
        cfg.row_pipeline = parse_json(p)?;
    }
    cfg.row_pipeline = args.pipeline.apply(cfg.row_pipeline);
    cfg.row_pipeline.validate().map_err(|e| CliError::Usage(e.to_string()))?;
    if args.no_otsu {
        cfg.use_otsu = false;
    }
    if let Some(t) = args.fixed_threshold {
        cfg.fixed_threshold = t;
    }
    if let Some(r) = args.open_radius {
        cfg.open_radius = r;
    }

    if let Some(manifest) = &args.manifest {
        let samples = load_manifest(manifest).map_err(manifest_error)?;
        let options = EvalOptions {
            workers: args.workers,
            resize: args.global.then_some(GLOBAL_SIZE),
            source: PredictionSource::Baseline(cfg),
        };
        let report =
            evaluate_dataset(&samples, &cfg.row_pipeline, &options).map_err(|e| CliError::Usage(e.to_string()))?;
        return finish_report(&report, &args.output);
    }
    if args.images.is_empty() {
        return Err(CliError::Usage("give one or more images or --manifest".into()));
    }
    let mut results = Vec::new();
    for path in &args.images {
        let img = read_image(path).map_err(|e| CliError::Io(e.to_string()))?.into_rgb();
        let rows = classic_detect(&img, &cfg).map_err(|e| CliError::Usage(e.to_string()))?;
        results.push((path.display().to_string(), rows));
    }
    let out: Vec<ImageRows> = results.iter().map(|(image, rows)| ImageRows { image: image.clone(), rows }).collect();
    print_json(&out)?;
    Ok(0)
}

fn run_synth(args: SynthArgs) -> Result<u8, CliError> {
    let spec: SceneSpec = parse_json(&args.spec)?;
    let usage = |e: croprow::synthgen::SynthError| CliError::Usage(e.to_string());
    if args.mask_out.is_none() && args.gt_out.is_none() && args.rgb_out.is_none() {
        return Err(CliError::Usage("nothing to write: give --mask-out, --gt-out or --rgb-out".into()));
    }
    if let Some(p) = &args.mask_out {
        write_out(Some(p), &encode_mask(&render_mask(&spec).map_err(usage)?))?;
    }
    if let Some(p) = &args.gt_out {
        write_out(Some(p), &encode_mask(&render_gt_mask(&spec).map_err(usage)?))?;
    }
    if let Some(p) = &args.rgb_out {
        let img = render_rgb(&spec, args.crop_color, args.soil_color).map_err(usage)?;
        write_out(Some(p), &encode_rgb_ppm(&img))?;
    }
    Ok(0)
}

fn run_report(args: ReportArgs) -> Result<u8, CliError> {
    let report = parse_report_json(&read(&args.input)?)
        .map_err(|e| CliError::Usage(format!("{}: {e}", args.input.display())))?;
    write_out(args.output.out.as_deref(), &emit_report(&report, args.output.format))?;
    Ok(0)
}

fn print_json<T: Serialize>(value: &T) -> Result<(), CliError> {
    let mut bytes = serde_json::to_vec_pretty(value).expect("serializable");
    bytes.push(b'\n');
    write_out(None, &bytes)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    let result = match cli.command {
        Command::Eval(a) => run_eval(a),
        Command::Detect(a) => run_detect(a),
        Command::Baseline(a) => run_baseline(a),
        Command::Synth(a) => run_synth(a),
        Command::Report(a) => run_report(a),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("croprow: {e}");
            ExitCode::from(e.code())
        }
    }
}
