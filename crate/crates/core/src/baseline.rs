//! Classical color-based row detector used as a reference point.
//!
//! Excess-green index, global threshold and a morphological opening give a
//! vegetation mask, which then goes through the same thinning and Hough
//! stage as predicted masks. Only the mask source differs.

use serde::{Deserialize, Serialize};

use crate::imagecore::{binarize, BinaryMask, RgbImage};
use crate::preprocess::{excess_green, otsu_threshold};
use crate::rowcluster::{detect_rows, ConfigError, CropRow, PipelineConfig};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BaselineConfig {
    pub use_otsu: bool,
    /// Inclusive ExG threshold used when `use_otsu` is off.
    pub fixed_threshold: u8,
    /// Half-size of the square opening element; 0 disables the opening.
    pub open_radius: usize,
    pub row_pipeline: PipelineConfig,
}

impl Default for BaselineConfig {
    fn default() -> Self {
        Self { use_otsu: true, fixed_threshold: 128, open_radius: 1, row_pipeline: PipelineConfig::default() }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct VegetationMask {
    pub mask: BinaryMask,
    /// Inclusive threshold applied to the ExG image.
    pub threshold: u8,
    /// Otsu saw a constant ExG image.
    pub degenerate: bool,
}

pub fn vegetation_mask(img: &RgbImage, config: &BaselineConfig) -> VegetationMask {
    let exg = excess_green(img);
    let (threshold, degenerate) = if config.use_otsu {
        let otsu = otsu_threshold(&exg);
        // Otsu's dark class is `<= t`; vegetation is everything above it
        (otsu.threshold.saturating_add(1), otsu.degenerate)
    } else {
        (config.fixed_threshold, false)
    };
    let raw = binarize(&exg, threshold);
    let mask = if config.open_radius > 0 { open(&raw, config.open_radius) } else { raw };
    VegetationMask { mask, threshold, degenerate }
}

pub fn classic_detect(img: &RgbImage, config: &BaselineConfig) -> Result<Vec<CropRow>, ConfigError> {
    detect_rows(&vegetation_mask(img, config).mask, &config.row_pipeline)
}

/// Erosion then dilation with a `(2r+1)²` square, windows clipped to the image.
pub fn open(mask: &BinaryMask, radius: usize) -> BinaryMask {
    let eroded = square_filter(mask, radius, true);
    square_filter(&eroded, radius, false)
}

/// Separable min (`erode`) or max filter over a square window.
fn square_filter(mask: &BinaryMask, radius: usize, erode: bool) -> BinaryMask {
    let (w, h) = mask.dimensions();
    let pass = |get: &dyn Fn(usize, usize) -> bool, x: usize, y: usize, horizontal: bool| {
        let (pos, len) = if horizontal { (x, w) } else { (y, h) };
        let lo = pos.saturating_sub(radius);
        let hi = (pos + radius).min(len - 1);
        let mut it = (lo..=hi).map(|p| if horizontal { get(p, y) } else { get(x, p) });
        if erode {
            it.all(|b| b)
        } else {
            it.any(|b| b)
        }
    };
    let rows = BinaryMask::from_fn(w, h, |x, y| pass(&|a, b| mask.get(a, b), x, y, true));
    BinaryMask::from_fn(w, h, |x, y| pass(&|a, b| rows.get(a, b), x, y, false))
}
