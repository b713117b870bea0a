//! Angle error between ground-truth and predicted crop rows.
//!
//! Angles from both images are pooled and clustered again. Every cluster
//! with at least two members scores the spread of its angles, and the
//! error is the mean spread over scoring clusters.

use serde::{Deserialize, Serialize};

use crate::houghlines::{circular_distance, RowAngle};
use crate::imagecore::BinaryMask;
use crate::rowcluster::{dbscan_circular, detect_rows, ConfigError, PipelineConfig};
use crate::segmetrics::{seg_scores, DimensionMismatch, SegScores};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Origin {
    GroundTruth,
    Prediction,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TaggedAngle {
    pub angle: RowAngle,
    pub origin: Origin,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AngleErrorResult {
    /// Number of scoring clusters (two or more members).
    pub k: usize,
    /// In-cluster angle span of each scoring cluster, degrees.
    pub cluster_spans: Vec<f64>,
    /// Mean span; `None` when no cluster scored.
    pub mean_error: Option<f64>,
    pub unmatched_gt: usize,
    pub unmatched_pred: usize,
    /// Scoring clusters holding angles from both images.
    pub mixed_origin_k: usize,
}

/// Span of a set of angles after unwrapping them around their circular mean,
/// so a cluster straddling ±90° measures its true spread.
pub fn circular_span(angles: &[f64]) -> f64 {
    if angles.len() < 2 {
        return 0.0;
    }
    // mean of axial data: average the doubled angles
    let (s, c) = angles.iter().fold((0.0, 0.0), |(s, c), a| {
        let (sa, ca) = (2.0 * a).to_radians().sin_cos();
        (s + sa, c + ca)
    });
    let center = if s.hypot(c) < 1e-12 { angles[0] } else { s.atan2(c).to_degrees() / 2.0 };
    // measure offsets from the member nearest the mean so exact inputs give exact spans
    let pivot = angles
        .iter()
        .copied()
        .min_by(|a, b| circular_distance(*a, center).total_cmp(&circular_distance(*b, center)))
        .expect("at least two angles");
    let offsets = angles.iter().map(|a| {
        let mut d = (a - pivot).rem_euclid(180.0);
        if d >= 90.0 {
            d -= 180.0;
        }
        d
    });
    let (lo, hi) = offsets.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
    hi - lo
}

/// Pools both angle sets (ground truth first), clusters them with radius
/// `eps2` and averages the spans of clusters with at least two members.
pub fn pair_and_score(gt: &[RowAngle], pred: &[RowAngle], eps2: f64, min_pts: usize) -> AngleErrorResult {
    let tagged: Vec<TaggedAngle> = gt
        .iter()
        .map(|&angle| TaggedAngle { angle, origin: Origin::GroundTruth })
        .chain(pred.iter().map(|&angle| TaggedAngle { angle, origin: Origin::Prediction }))
        .collect();
    let values: Vec<RowAngle> = tagged.iter().map(|t| t.angle).collect();
    let labeling = dbscan_circular(&values, eps2, min_pts);

    let mut result = AngleErrorResult {
        k: 0,
        cluster_spans: Vec::new(),
        mean_error: None,
        unmatched_gt: 0,
        unmatched_pred: 0,
        mixed_origin_k: 0,
    };
    let unmatched = |members: &[usize], result: &mut AngleErrorResult| {
        for &i in members {
            match tagged[i].origin {
                Origin::GroundTruth => result.unmatched_gt += 1,
                Origin::Prediction => result.unmatched_pred += 1,
            }
        }
    };
    for members in labeling.members() {
        if members.len() < 2 {
            unmatched(&members, &mut result);
            continue;
        }
        let angles: Vec<f64> = members.iter().map(|&i| tagged[i].angle.degrees()).collect();
        result.cluster_spans.push(circular_span(&angles));
        let has = |o| members.iter().any(|&i| tagged[i].origin == o);
        if has(Origin::GroundTruth) && has(Origin::Prediction) {
            result.mixed_origin_k += 1;
        }
    }
    unmatched(&labeling.noise(), &mut result);
    result.k = result.cluster_spans.len();
    if result.k > 0 {
        result.mean_error = Some(result.cluster_spans.iter().sum::<f64>() / result.k as f64);
    }
    result
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairEvaluation {
    pub angle: AngleErrorResult,
    pub scores: SegScores,
    pub gt_row_count: usize,
    pub pred_row_count: usize,
}

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum EvaluateError {
    #[error(transparent)]
    Dimensions(#[from] DimensionMismatch),
    #[error(transparent)]
    Config(#[from] ConfigError),
}

/// Runs row detection on both masks with the same config and scores them.
pub fn evaluate_pair(
    gt_mask: &BinaryMask,
    pred_mask: &BinaryMask,
    config: &PipelineConfig,
) -> Result<PairEvaluation, EvaluateError> {
    let scores = seg_scores(gt_mask, pred_mask)?;
    let (gt_rows, pred_rows) = rayon::join(|| detect_rows(gt_mask, config), || detect_rows(pred_mask, config));
    let (gt_rows, pred_rows) = (gt_rows?, pred_rows?);
    let gt_angles: Vec<RowAngle> = gt_rows.iter().map(|r| r.angle).collect();
    let pred_angles: Vec<RowAngle> = pred_rows.iter().map(|r| r.angle).collect();
    Ok(PairEvaluation {
        angle: pair_and_score(&gt_angles, &pred_angles, config.eps2, config.min_pts),
        scores,
        gt_row_count: gt_rows.len(),
        pred_row_count: pred_rows.len(),
    })
}
