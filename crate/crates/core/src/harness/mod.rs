//! Dataset evaluation: manifests in, per-category reports out.

mod manifest;
mod report;
mod resize;

pub use manifest::{load_manifest, Category, ManifestError, Sample, MANIFEST_HEADER};
pub use report::{emit_report, parse_report_json, ReportFormat};
pub use resize::{resize_gray, resize_mask, resize_rgb, scaled_row_angle, GLOBAL_SIZE};

use std::collections::BTreeMap;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::anglemetric::{evaluate_pair, PairEvaluation};
use crate::baseline::{vegetation_mask, BaselineConfig};
use crate::imagecore::{binarize, read_image, BinaryMask};
use crate::rowcluster::{ConfigError, PipelineConfig};

/// Gray level at or above which a stored mask pixel counts as white.
pub const MASK_THRESHOLD: u8 = 128;

pub const TOOL_VERSION: &str = concat!("croprow ", env!("CARGO_PKG_VERSION"));

const BASELINE_NOTE: &str = "predictions come from the excess-green baseline \
(ExG -> threshold -> opening), not from pred_mask; contour extraction is replaced by the shared thinning + Hough stage";

/// Where predicted masks come from.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PredictionSource {
    /// The manifest's `pred_mask` column.
    MaskFile,
    /// The vegetation mask of the manifest's `image` column.
    Baseline(BaselineConfig),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvalOptions {
    /// Worker threads; 0 picks the rayon default.
    pub workers: usize,
    /// Resample every mask (and image) to this size before scoring.
    pub resize: Option<(usize, usize)>,
    pub source: PredictionSource,
}

impl Default for EvalOptions {
    fn default() -> Self {
        Self { workers: 0, resize: None, source: PredictionSource::MaskFile }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CategoryReport {
    pub category_id: String,
    pub category_name: String,
    pub sample_count: usize,
    pub mean_accuracy: f64,
    pub mean_iou: f64,
    /// Averaged over samples with at least one scoring cluster.
    pub mean_angle_error: Option<f64>,
    pub detection_rate: f64,
    pub mean_gt_rows: f64,
    pub mean_pred_rows: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleFailure {
    pub row: usize,
    pub gt_mask: String,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub tool_version: String,
    pub config_echo: PipelineConfig,
    #[serde(default)]
    pub baseline: Option<BaselineConfig>,
    pub per_category: Vec<CategoryReport>,
    pub overall: CategoryReport,
    #[serde(default)]
    pub failures: Vec<SampleFailure>,
    #[serde(default)]
    pub notes: Vec<String>,
}

/// One evaluated sample.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleResult {
    pub category: Category,
    pub evaluation: PairEvaluation,
}

/// Running sums for one group of samples.
#[derive(Debug, Clone, Copy, Default)]
struct Totals {
    n: usize,
    accuracy: f64,
    iou: f64,
    angle: f64,
    detected: usize,
    gt_rows: usize,
    pred_rows: usize,
}

impl Totals {
    fn add(&mut self, e: &PairEvaluation) {
        self.n += 1;
        self.accuracy += e.scores.accuracy;
        self.iou += e.scores.iou;
        if let Some(err) = e.angle.mean_error {
            self.angle += err;
            self.detected += 1;
        }
        self.gt_rows += e.gt_row_count;
        self.pred_rows += e.pred_row_count;
    }

    fn report(&self, id: &str, name: &str) -> CategoryReport {
        let n = self.n.max(1) as f64;
        CategoryReport {
            category_id: id.to_string(),
            category_name: name.to_string(),
            sample_count: self.n,
            mean_accuracy: self.accuracy / n,
            mean_iou: self.iou / n,
            mean_angle_error: (self.detected > 0).then(|| self.angle / self.detected as f64),
            detection_rate: self.detected as f64 / n,
            mean_gt_rows: self.gt_rows as f64 / n,
            mean_pred_rows: self.pred_rows as f64 / n,
        }
    }
}

pub const OVERALL_ID: &str = "all";
pub const OVERALL_NAME: &str = "Overall";

/// Groups per-sample results into category rows and an overall row.
///
/// Results are summed in a canonical order (category, then the values
/// themselves), so the report does not depend on input order or on how
/// many workers produced the results.
pub fn aggregate(results: &[SampleResult]) -> (Vec<CategoryReport>, CategoryReport) {
    let mut sorted: Vec<&SampleResult> = results.iter().collect();
    sorted.sort_by(|a, b| {
        a.category.cmp(&b.category).then_with(|| {
            let key = |r: &SampleResult| {
                (
                    r.evaluation.scores.accuracy,
                    r.evaluation.scores.iou,
                    r.evaluation.angle.mean_error.unwrap_or(-1.0),
                    r.evaluation.gt_row_count,
                    r.evaluation.pred_row_count,
                )
            };
            key(a).partial_cmp(&key(b)).unwrap_or(std::cmp::Ordering::Equal)
        })
    });
    let mut groups: BTreeMap<Category, Totals> = BTreeMap::new();
    let mut overall = Totals::default();
    for r in sorted {
        groups.entry(r.category).or_default().add(&r.evaluation);
        overall.add(&r.evaluation);
    }
    let per_category = groups.iter().map(|(c, t)| t.report(c.id(), c.name())).collect();
    (per_category, overall.report(OVERALL_ID, OVERALL_NAME))
}

fn load_mask(path: &Path, resize: Option<(usize, usize)>) -> Result<BinaryMask, String> {
    let img = read_image(path).map_err(|e| e.to_string())?;
    let mask = binarize(&img.into_gray(), MASK_THRESHOLD);
    Ok(match resize {
        Some(size) => resize_mask(&mask, size),
        None => mask,
    })
}

/// Scores a single manifest sample.
pub fn evaluate_sample(
    sample: &Sample,
    config: &PipelineConfig,
    options: &EvalOptions,
) -> Result<SampleResult, String> {
    let gt = load_mask(&sample.gt_mask_path, options.resize)?;
    let pred = match options.source {
        PredictionSource::MaskFile => {
            let path = sample.pred_mask_path.as_deref().ok_or("pred_mask is empty")?;
            load_mask(path, options.resize)?
        }
        PredictionSource::Baseline(baseline) => {
            let path = sample.image_path.as_deref().ok_or("image is empty; the baseline needs an RGB image")?;
            let mut img = read_image(path).map_err(|e| e.to_string())?.into_rgb();
            if let Some(size) = options.resize {
                img = resize_rgb(&img, size);
            }
            vegetation_mask(&img, &baseline).mask
        }
    };
    let evaluation = evaluate_pair(&gt, &pred, config).map_err(|e| e.to_string())?;
    Ok(SampleResult { category: sample.category, evaluation })
}

/// Evaluates every sample on a worker pool and aggregates the results.
/// Per-sample failures are collected in the report rather than aborting.
pub fn evaluate_dataset(
    samples: &[Sample],
    config: &PipelineConfig,
    options: &EvalOptions,
) -> Result<RunReport, ConfigError> {
    config.validate()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(options.workers)
        .build()
        .map_err(|e| ConfigError(format!("worker pool: {e}")))?;
    let outcomes: Vec<Result<SampleResult, String>> =
        pool.install(|| samples.par_iter().map(|s| evaluate_sample(s, config, options)).collect());

    let mut results = Vec::new();
    let mut failures = Vec::new();
    for (sample, outcome) in samples.iter().zip(outcomes) {
        match outcome {
            Ok(r) => results.push(r),
            Err(reason) => failures.push(SampleFailure {
                row: sample.row,
                gt_mask: sample.gt_mask_path.display().to_string(),
                reason,
            }),
        }
    }
    failures.sort_by_key(|f| f.row);
    let (per_category, overall) = aggregate(&results);
    let (baseline, notes) = match options.source {
        PredictionSource::MaskFile => (None, Vec::new()),
        PredictionSource::Baseline(b) => (Some(b), vec![BASELINE_NOTE.to_string()]),
    };
    Ok(RunReport {
        tool_version: TOOL_VERSION.to_string(),
        config_echo: *config,
        baseline,
        per_category,
        overall,
        failures,
        notes,
    })
}
