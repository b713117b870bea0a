//! Pixel accuracy and white-pixel IoU between two masks.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::imagecore::BinaryMask;

#[derive(Debug, Error, Clone, Copy, PartialEq, Eq)]
#[error("mask dimensions differ: {left:?} vs {right:?}")]
pub struct DimensionMismatch {
    pub left: (usize, usize),
    pub right: (usize, usize),
}

/// Confusion counts with white as the positive class.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Confusion {
    pub tp: u64,
    pub fp: u64,
    pub fn_: u64,
    pub tn: u64,
}

impl Confusion {
    pub fn total(&self) -> u64 {
        self.tp + self.fp + self.fn_ + self.tn
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SegScores {
    pub accuracy: f64,
    pub iou: f64,
    pub tp: u64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
    pub tn: u64,
    /// Neither mask has a white pixel; IoU is reported as 1.
    pub both_empty: bool,
}

fn check(gt: &BinaryMask, pred: &BinaryMask) -> Result<(), DimensionMismatch> {
    if gt.dimensions() != pred.dimensions() {
        return Err(DimensionMismatch { left: gt.dimensions(), right: pred.dimensions() });
    }
    Ok(())
}

pub fn confusion_counts(gt: &BinaryMask, pred: &BinaryMask) -> Result<Confusion, DimensionMismatch> {
    check(gt, pred)?;
    let mut c = Confusion::default();
    for (&g, &p) in gt.bits().iter().zip(pred.bits()) {
        match (g, p) {
            (true, true) => c.tp += 1,
            (false, true) => c.fp += 1,
            (true, false) => c.fn_ += 1,
            (false, false) => c.tn += 1,
        }
    }
    Ok(c)
}

impl SegScores {
    pub fn from_confusion(c: Confusion) -> Self {
        let union = c.tp + c.fp + c.fn_;
        let both_empty = union == 0;
        Self {
            accuracy: (c.tp + c.tn) as f64 / c.total() as f64,
            iou: if both_empty { 1.0 } else { c.tp as f64 / union as f64 },
            tp: c.tp,
            fp: c.fp,
            fn_: c.fn_,
            tn: c.tn,
            both_empty,
        }
    }
}

pub fn seg_scores(gt: &BinaryMask, pred: &BinaryMask) -> Result<SegScores, DimensionMismatch> {
    confusion_counts(gt, pred).map(SegScores::from_confusion)
}

/// |gt ∧ pred| / |gt ∨ pred| over white pixels; 1.0 when both are empty.
pub fn iou_white(gt: &BinaryMask, pred: &BinaryMask) -> Result<f64, DimensionMismatch> {
    seg_scores(gt, pred).map(|s| s.iou)
}

pub fn pixel_accuracy(gt: &BinaryMask, pred: &BinaryMask) -> Result<f64, DimensionMismatch> {
    seg_scores(gt, pred).map(|s| s.accuracy)
}
