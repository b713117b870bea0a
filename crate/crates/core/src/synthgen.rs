//! Deterministic synthetic crop-row scenes with known geometry.
//!
//! Rows are straight bands in image space. Noise comes from SplitMix64
//! (Steele, Lea & Flood 2014; the `java.util.SplittableRandom` mixer)
//! seeded from the scene spec and drawn once per pixel in raster order,
//! so a spec renders to identical bytes on every platform.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::houghlines::RowAngle;
use crate::imagecore::{BinaryMask, RgbImage};

/// Speckle never lands within this many pixels (Chebyshev) of a row.
pub const SPECKLE_CLEARANCE: usize = 3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RowSpec {
    pub angle: RowAngle,
    /// Signed ρ of the row's center line, `x·cosθ + y·sinθ = offset` with θ
    /// the normal angle of `angle`.
    pub offset: f64,
    pub width: u32,
    /// Erased stretches as `(start, end)` fractions along the row.
    #[serde(default)]
    pub gaps: Vec<(f64, f64)>,
}

impl RowSpec {
    /// A gap-free row through pixel position `(x, y)`.
    pub fn through(angle: RowAngle, x: f64, y: f64, width: u32) -> Self {
        let (s, c) = angle.normal_theta().to_radians().sin_cos();
        RowSpec { angle, offset: x * c + y * s, width, gaps: Vec::new() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SceneSpec {
    /// `(width, height)` in pixels.
    pub size: (usize, usize),
    pub rows: Vec<RowSpec>,
    #[serde(default)]
    pub speckle_density: f64,
    #[serde(default)]
    pub seed: u64,
}

#[derive(Debug, Error, PartialEq)]
pub enum SynthError {
    #[error("scene must be at least 32x32, got {0}x{1}")]
    TooSmall(usize, usize),
    #[error("speckle density {0} outside [0, 0.5)")]
    SpeckleDensity(f64),
    #[error("row {0}: width must be at least 1")]
    RowWidth(usize),
    #[error("row {0}: gap intervals must lie in [0,1], be ordered and not overlap")]
    Gaps(usize),
    #[error("expected {expected} angle deltas, got {got}")]
    DeltaCount { expected: usize, got: usize },
    #[error("crop and soil colors must differ")]
    SameColors,
}

impl SceneSpec {
    pub fn validate(&self) -> Result<(), SynthError> {
        let (w, h) = self.size;
        if w < 32 || h < 32 {
            return Err(SynthError::TooSmall(w, h));
        }
        if !(0.0..0.5).contains(&self.speckle_density) {
            return Err(SynthError::SpeckleDensity(self.speckle_density));
        }
        for (i, row) in self.rows.iter().enumerate() {
            if row.width == 0 {
                return Err(SynthError::RowWidth(i));
            }
            let mut gaps = row.gaps.clone();
            gaps.sort_by(|a, b| a.0.total_cmp(&b.0));
            let ordered = gaps.iter().all(|&(s, e)| (0.0..=1.0).contains(&s) && (0.0..=1.0).contains(&e) && s <= e);
            let disjoint = gaps.windows(2).all(|p| p[0].1 <= p[1].0);
            if !ordered || !disjoint {
                return Err(SynthError::Gaps(i));
            }
        }
        Ok(())
    }
}

/// SplitMix64 generator.
#[derive(Debug, Clone)]
pub struct SplitMix64(u64);

impl SplitMix64 {
    pub fn new(seed: u64) -> Self {
        SplitMix64(seed)
    }

    pub fn next_u64(&mut self) -> u64 {
        self.0 = self.0.wrapping_add(0x9e37_79b9_7f4a_7c15);
        let mut z = self.0;
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
        z ^ (z >> 31)
    }

    /// Uniform in `[0, 1)` from the top 53 bits.
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }
}

/// Pixels of one row, optionally with its gaps erased.
fn row_pixels(row: &RowSpec, (w, h): (usize, usize), with_gaps: bool) -> Vec<(usize, usize)> {
    let theta = row.angle.normal_theta().to_radians();
    let (s, c) = theta.sin_cos();
    let steep = row.angle.degrees().abs() <= 45.0;
    let (major_len, minor_len) = if steep { (h, w) } else { (w, h) };
    // center of the band on each major-axis scanline that stays in the image
    let centers: Vec<(usize, i64)> = (0..major_len)
        .filter_map(|m| {
            let center = if steep { (row.offset - m as f64 * s) / c } else { (row.offset - m as f64 * c) / s };
            let center = center.round();
            (center >= 0.0 && center < minor_len as f64).then_some((m, center as i64))
        })
        .collect();
    let n = centers.len();
    let half = (row.width as i64 - 1) / 2;
    let mut out = Vec::with_capacity(n * row.width as usize);
    for (k, &(m, center)) in centers.iter().enumerate() {
        let t = k as f64 / n as f64;
        if with_gaps && row.gaps.iter().any(|&(gs, ge)| gs <= t && t < ge) {
            continue;
        }
        for minor in (center - half)..(center - half + row.width as i64) {
            if minor < 0 || minor >= minor_len as i64 {
                continue;
            }
            let minor = minor as usize;
            out.push(if steep { (minor, m) } else { (m, minor) });
        }
    }
    out
}

fn rows_mask(spec: &SceneSpec, with_gaps: bool) -> BinaryMask {
    let (w, h) = spec.size;
    let mut mask = BinaryMask::empty(w, h);
    for row in &spec.rows {
        for (x, y) in row_pixels(row, spec.size, with_gaps) {
            mask.set(x, y, true);
        }
    }
    mask
}

fn speckle_mask(spec: &SceneSpec) -> BinaryMask {
    let (w, h) = spec.size;
    let body = rows_mask(spec, false);
    let r = SPECKLE_CLEARANCE;
    // prefix sums of the row body for O(1) clearance checks
    let mut sat = vec![0u32; (w + 1) * (h + 1)];
    for y in 0..h {
        for x in 0..w {
            sat[(y + 1) * (w + 1) + x + 1] =
                body.get(x, y) as u32 + sat[y * (w + 1) + x + 1] + sat[(y + 1) * (w + 1) + x] - sat[y * (w + 1) + x];
        }
    }
    let near_row = |x: usize, y: usize| {
        let (x0, y0) = (x.saturating_sub(r), y.saturating_sub(r));
        let (x1, y1) = ((x + r + 1).min(w), (y + r + 1).min(h));
        sat[y1 * (w + 1) + x1] + sat[y0 * (w + 1) + x0] > sat[y0 * (w + 1) + x1] + sat[y1 * (w + 1) + x0]
    };
    let mut rng = SplitMix64::new(spec.seed);
    BinaryMask::from_fn(w, h, |x, y| {
        let u = rng.next_f64();
        u < spec.speckle_density && !near_row(x, y)
    })
}

/// Ground-truth mask: rows with gaps erased, no speckle.
pub fn render_gt_mask(spec: &SceneSpec) -> Result<BinaryMask, SynthError> {
    spec.validate()?;
    Ok(rows_mask(spec, true))
}

/// Rows plus seeded speckle, the noisy surrogate of a predicted mask.
pub fn render_mask(spec: &SceneSpec) -> Result<BinaryMask, SynthError> {
    spec.validate()?;
    let mut mask = rows_mask(spec, true);
    if spec.speckle_density > 0.0 {
        let speckle = speckle_mask(spec);
        for (x, y) in speckle.white_pixels() {
            mask.set(x, y, true);
        }
    }
    Ok(mask)
}

/// Paints [`render_mask`] pixels with `crop_color` over `soil_color`.
pub fn render_rgb(spec: &SceneSpec, crop_color: [u8; 3], soil_color: [u8; 3]) -> Result<RgbImage, SynthError> {
    if crop_color == soil_color {
        return Err(SynthError::SameColors);
    }
    let mask = render_mask(spec)?;
    let (w, h) = spec.size;
    let samples = mask.bits().iter().map(|&b| if b { crop_color } else { soil_color }).collect();
    Ok(RgbImage::new(w, h, samples).expect("scene size checked"))
}

/// Rotates each row by its delta.
///
/// The row keeps its offset unless the rotation carries its normal angle
/// across 0°/180°; there (θ, ρ) and (θ ± 180°, −ρ) describe the same line,
/// so the offset is negated to keep the rotation continuous.
pub fn perturb_spec(spec: &SceneSpec, angle_deltas: &[f64]) -> Result<SceneSpec, SynthError> {
    if angle_deltas.len() != spec.rows.len() {
        return Err(SynthError::DeltaCount { expected: spec.rows.len(), got: angle_deltas.len() });
    }
    let mut out = spec.clone();
    for (row, &delta) in out.rows.iter_mut().zip(angle_deltas) {
        let raw = row.angle.normal_theta() + delta;
        let turns = (raw / 180.0).floor();
        if turns as i64 % 2 != 0 {
            row.offset = -row.offset;
        }
        row.angle = RowAngle::new(raw);
    }
    Ok(out)
}
