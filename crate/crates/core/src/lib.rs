//! Crop row detection from binary segmentation masks, plus the metrics and
//! tooling used to evaluate it.
//!
//! The detector thins a mask, runs a line Hough transform, and groups the
//! resulting lines by angle into rows. [`anglemetric`] scores a predicted
//! mask against ground truth by how well their row angles agree.

pub mod anglemetric;
pub mod baseline;
pub mod harness;
pub mod houghlines;
pub mod imagecore;
pub mod preprocess;
pub mod rowcluster;
pub mod segmetrics;
pub mod synthgen;

pub use anglemetric::{evaluate_pair, pair_and_score, AngleErrorResult, PairEvaluation};
pub use houghlines::{LineRT, RowAngle};
pub use imagecore::{BinaryMask, GrayImage, RgbImage};
pub use rowcluster::{detect_rows, CropRow, PipelineConfig};
