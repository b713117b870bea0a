//! Standard (ρ, θ) Hough transform over binary masks.
//!
//! Lines use the normal form `x·cosθ + y·sinθ = ρ` with the origin at the
//! top-left pixel, x to the right and y down. θ covers `[0°, 180°)` and ρ
//! covers `[-D, D]`, D being the image diagonal.

use std::cmp::Ordering;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::imagecore::BinaryMask;

/// Direction of a crop row as its deviation from the image vertical, in
/// degrees. Values live in `(-90, 90]` and are equivalent modulo 180.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(transparent)]
pub struct RowAngle(f64);

impl RowAngle {
    /// Wraps any finite angle into `(-90, 90]`.
    pub fn new(degrees: f64) -> Self {
        let mut a = degrees.rem_euclid(180.0);
        if a > 90.0 {
            a -= 180.0;
        }
        RowAngle(a)
    }

    pub fn degrees(self) -> f64 {
        self.0
    }

    /// Normal angle θ in `[0, 180)` of a line running in this direction.
    pub fn normal_theta(self) -> f64 {
        if self.0 < 0.0 {
            self.0 + 180.0
        } else {
            self.0
        }
    }

    /// Circular distance modulo 180°, in `[0, 90]`.
    pub fn distance(self, other: RowAngle) -> f64 {
        circular_distance(self.0, other.0)
    }
}

pub fn circular_distance(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(180.0);
    d.min(180.0 - d)
}

/// A detected line in normal form.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LineRT {
    pub rho: f64,
    /// Degrees in `[0, 180)`.
    pub theta: f64,
    pub votes: u32,
}

/// Vote grid indexed by (θ bin, ρ bin).
#[derive(Debug, Clone, PartialEq)]
pub struct HoughAccumulator {
    theta_res: f64,
    rho_res: f64,
    theta_bins: usize,
    rho_bins: usize,
    /// Index of the ρ = 0 bin.
    rho_zero: usize,
    votes: Vec<u32>,
}

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum HoughError {
    #[error("theta resolution {0}° must be positive and divide 180")]
    ThetaResolution(f64),
    #[error("rho resolution {0} must be positive")]
    RhoResolution(f64),
}

impl HoughAccumulator {
    pub fn theta_res(&self) -> f64 {
        self.theta_res
    }

    pub fn rho_res(&self) -> f64 {
        self.rho_res
    }

    pub fn theta_bins(&self) -> usize {
        self.theta_bins
    }

    pub fn rho_bins(&self) -> usize {
        self.rho_bins
    }

    /// θ value (degrees) voted for by bin `t`.
    pub fn theta_at(&self, t: usize) -> f64 {
        t as f64 * self.theta_res()
    }

    /// ρ value (pixels) at the center of bin `r`.
    pub fn rho_at(&self, r: usize) -> f64 {
        (r as f64 - self.rho_zero as f64) * self.rho_res()
    }

    /// Bin index holding ρ, if inside the grid.
    pub fn rho_bin(&self, rho: f64) -> Option<usize> {
        let idx = (rho / self.rho_res()).round() as i64 + self.rho_zero as i64;
        (0..self.rho_bins as i64).contains(&idx).then_some(idx as usize)
    }

    pub fn votes(&self, theta_bin: usize, rho_bin: usize) -> u32 {
        self.votes[theta_bin * self.rho_bins + rho_bin]
    }

    pub fn total_votes(&self) -> u64 {
        self.votes.iter().map(|&v| v as u64).sum()
    }

    fn merge(mut self, other: &HoughAccumulator) -> Self {
        for (a, b) in self.votes.iter_mut().zip(&other.votes) {
            *a += b;
        }
        self
    }
}

fn theta_bin_count(theta_res: f64) -> Result<usize, HoughError> {
    if !(theta_res > 0.0 && theta_res <= 180.0) {
        return Err(HoughError::ThetaResolution(theta_res));
    }
    let n = (180.0 / theta_res).round();
    if (n * theta_res - 180.0).abs() > 1e-9 {
        return Err(HoughError::ThetaResolution(theta_res));
    }
    Ok(n as usize)
}

struct Tables {
    cos: Vec<f64>,
    sin: Vec<f64>,
}

fn empty_accumulator(
    mask: &BinaryMask,
    theta_res: f64,
    rho_res: f64,
) -> Result<(HoughAccumulator, Tables), HoughError> {
    let theta_bins = theta_bin_count(theta_res)?;
    if !(rho_res > 0.0 && rho_res.is_finite()) {
        return Err(HoughError::RhoResolution(rho_res));
    }
    let (w, h) = mask.dimensions();
    let diagonal = ((w * w + h * h) as f64).sqrt();
    let rho_zero = (diagonal / rho_res).ceil() as usize;
    let rho_bins = 2 * rho_zero + 1;
    let (sin, cos): (Vec<f64>, Vec<f64>) =
        (0..theta_bins).map(|t| (t as f64 * theta_res).to_radians().sin_cos()).unzip();
    let acc =
        HoughAccumulator { theta_res, rho_res, theta_bins, rho_bins, rho_zero, votes: vec![0; theta_bins * rho_bins] };
    Ok((acc, Tables { cos, sin }))
}

fn vote_rows(acc: &mut HoughAccumulator, tables: &Tables, mask: &BinaryMask, rows: std::ops::Range<usize>) {
    let w = mask.width();
    let inv_res = 1.0 / acc.rho_res();
    let zero = acc.rho_zero as f64;
    let stride = acc.rho_bins;
    let bits = mask.bits();
    for y in rows {
        for (x, _) in bits[y * w..(y + 1) * w].iter().enumerate().filter(|(_, &b)| b) {
            let (xf, yf) = (x as f64, y as f64);
            for t in 0..acc.theta_bins {
                let rho = xf * tables.cos[t] + yf * tables.sin[t];
                let r = ((rho * inv_res).round() + zero) as usize;
                acc.votes[t * stride + r] += 1;
            }
        }
    }
}

/// Every white pixel casts one vote per θ bin, into `round(ρ / rho_res)`.
pub fn hough_transform(mask: &BinaryMask, theta_res: f64, rho_res: f64) -> Result<HoughAccumulator, HoughError> {
    let (mut acc, tables) = empty_accumulator(mask, theta_res, rho_res)?;
    vote_rows(&mut acc, &tables, mask, 0..mask.height());
    Ok(acc)
}

/// Same as [`hough_transform`], splitting rows into `chunks` bands that vote
/// into private accumulators before an exact integer merge.
pub fn hough_transform_chunked(
    mask: &BinaryMask,
    theta_res: f64,
    rho_res: f64,
    chunks: usize,
) -> Result<HoughAccumulator, HoughError> {
    let (acc, tables) = empty_accumulator(mask, theta_res, rho_res)?;
    let h = mask.height();
    let band = h.div_ceil(chunks.max(1));
    let partials: Vec<HoughAccumulator> = (0..h)
        .step_by(band)
        .collect::<Vec<_>>()
        .into_par_iter()
        .map(|start| {
            let mut part = acc.clone();
            vote_rows(&mut part, &tables, mask, start..(start + band).min(h));
            part
        })
        .collect();
    Ok(partials.iter().fold(acc, |merged, part| merged.merge(part)))
}

/// Local maxima with at least `vote_threshold` votes.
///
/// A bin survives when no bin within `nms_radius = (θ bins, ρ bins)` beats
/// it; equal neighbors are resolved in favour of the lower (θ, ρ) index so
/// a plateau yields a single peak. The θ axis wraps: stepping past 180°
/// mirrors ρ, since (θ + 180°, −ρ) is the same line. Results are sorted by
/// votes descending, then θ and ρ ascending.
pub fn find_peaks(acc: &HoughAccumulator, vote_threshold: u32, nms_radius: (usize, usize)) -> Vec<LineRT> {
    let threshold = vote_threshold.max(1);
    let (nt, nr) = (acc.theta_bins as i64, acc.rho_bins as i64);
    let (rt, rr) = (nms_radius.0 as i64, nms_radius.1 as i64);
    let mut peaks = Vec::new();
    for t in 0..nt {
        for r in 0..nr {
            let idx = (t * nr + r) as usize;
            let v = acc.votes[idx];
            if v < threshold {
                continue;
            }
            let mut is_peak = true;
            'nbhd: for dt in -rt..=rt {
                let mut tt = t + dt;
                let mut mirrored = false;
                if tt < 0 {
                    tt += nt;
                    mirrored = true;
                } else if tt >= nt {
                    tt -= nt;
                    mirrored = true;
                }
                for dr in -rr..=rr {
                    if dt == 0 && dr == 0 {
                        continue;
                    }
                    let mut rbin = r + dr;
                    if mirrored {
                        rbin = 2 * acc.rho_zero as i64 - rbin;
                    }
                    if !(0..nr).contains(&rbin) {
                        continue;
                    }
                    let nidx = (tt * nr + rbin) as usize;
                    let nv = acc.votes[nidx];
                    if nv > v || (nv == v && nidx < idx) {
                        is_peak = false;
                        break 'nbhd;
                    }
                }
            }
            if is_peak {
                peaks.push(LineRT { rho: acc.rho_at(r as usize), theta: acc.theta_at(t as usize), votes: v });
            }
        }
    }
    peaks.sort_by(|a, b| {
        b.votes
            .cmp(&a.votes)
            .then(a.theta.partial_cmp(&b.theta).unwrap_or(Ordering::Equal))
            .then(a.rho.partial_cmp(&b.rho).unwrap_or(Ordering::Equal))
    });
    peaks
}

/// θ itself up to 90°, θ − 180° beyond.
pub fn angle_from_vertical(line: &LineRT) -> RowAngle {
    if line.theta <= 90.0 {
        RowAngle(line.theta)
    } else {
        RowAngle(line.theta - 180.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn mask_with(w: usize, h: usize, pixels: &[(usize, usize)]) -> BinaryMask {
        let mut m = BinaryMask::empty(w, h);
        for &(x, y) in pixels {
            m.set(x, y, true);
        }
        m
    }

    /// Direct accumulation oracle: recompute the vote count for one
    /// (θ, ρ-bin) cell by iterating every white pixel.
    fn oracle_votes(mask: &BinaryMask, theta: f64, rho_bin_value: f64, rho_res: f64) -> u32 {
        let (s, c) = theta.to_radians().sin_cos();
        mask.white_pixels()
            .filter(|&(x, y)| {
                let rho = x as f64 * c + y as f64 * s;
                (rho / rho_res).round() == (rho_bin_value / rho_res).round()
            })
            .count() as u32
    }

    #[test]
    fn rejects_bad_resolution() {
        let m = BinaryMask::empty(4, 4);
        assert!(hough_transform(&m, 0.7, 1.0).is_err());
        assert!(hough_transform(&m, 0.0, 1.0).is_err());
        assert!(hough_transform(&m, 1.0, 0.0).is_err());
    }

    #[test]
    fn empty_mask_has_no_votes() {
        let acc = hough_transform(&BinaryMask::empty(16, 8), 1.0, 1.0).unwrap();
        assert_eq!(acc.total_votes(), 0);
        assert!(find_peaks(&acc, 1, (2, 2)).is_empty());
    }

    #[test]
    fn single_pixel_two_bins() {
        let acc = hough_transform(&mask_with(8, 8, &[(3, 4)]), 90.0, 1.0).unwrap();
        assert_eq!(acc.theta_bins(), 2);
        assert_eq!(acc.votes(0, acc.rho_bin(3.0).unwrap()), 1);
        assert_eq!(acc.votes(1, acc.rho_bin(4.0).unwrap()), 1);
        assert_eq!(acc.total_votes(), 2);
    }

    #[test]
    fn vertical_segment_accumulates() {
        let pixels: Vec<_> = (0..100).map(|y| (10, y)).collect();
        let mask = mask_with(64, 100, &pixels);
        let acc = hough_transform(&mask, 1.0, 1.0).unwrap();
        assert_eq!(acc.votes(0, acc.rho_bin(10.0).unwrap()), oracle_votes(&mask, 0.0, 10.0, 1.0));
        assert_eq!(acc.votes(0, acc.rho_bin(10.0).unwrap()), 100);
        let peaks = find_peaks(&acc, 50, (2, 2));
        assert_eq!(peaks, vec![LineRT { rho: 10.0, theta: 0.0, votes: 100 }]);
    }

    #[test]
    fn two_synthetic_lines() {
        // digital lines at θ = 0° and θ = 20° through separated regions
        let (w, h) = (200, 200);
        let mut mask = BinaryMask::empty(w, h);
        for y in 0..h {
            mask.set(40, y, true);
        }
        let (s, c) = 20f64.to_radians().sin_cos();
        let rho = 150.0 * c + 100.0 * s;
        for y in 0..h {
            let x = ((rho - y as f64 * s) / c).round();
            if (0.0..w as f64).contains(&x) {
                mask.set(x as usize, y, true);
            }
        }
        let acc = hough_transform(&mask, 1.0, 1.0).unwrap();
        let peaks = find_peaks(&acc, (0.6 * h as f64) as u32, (2, 2));
        let thetas: Vec<f64> = peaks.iter().map(|p| p.theta).collect();
        assert_eq!(peaks.len(), 2, "{peaks:?}");
        assert!(thetas.contains(&0.0) && thetas.contains(&20.0), "{thetas:?}");
    }

    #[test]
    fn peak_order_is_total() {
        let mut pixels: Vec<_> = (0..30).map(|y| (5, y)).collect();
        pixels.extend((0..30).map(|y| (25, y)));
        let acc = hough_transform(&mask_with(40, 30, &pixels), 1.0, 1.0).unwrap();
        let peaks = find_peaks(&acc, 20, (2, 2));
        assert_eq!(peaks.len(), 2);
        assert_eq!((peaks[0].theta, peaks[0].rho), (0.0, 5.0));
        assert_eq!((peaks[1].theta, peaks[1].rho), (0.0, 25.0));
    }

    #[test]
    fn vertical_angle_conversion() {
        let line = |theta| LineRT { rho: 0.0, theta, votes: 1 };
        assert_eq!(angle_from_vertical(&line(0.0)).degrees(), 0.0);
        assert_eq!(angle_from_vertical(&line(45.0)).degrees(), 45.0);
        assert_eq!(angle_from_vertical(&line(135.0)).degrees(), -45.0);
        assert_eq!(angle_from_vertical(&line(90.0)).degrees(), 90.0);
    }

    #[test]
    fn row_angle_wraps() {
        assert_eq!(RowAngle::new(90.5).degrees(), -89.5);
        assert_eq!(RowAngle::new(-90.0).degrees(), 90.0);
        assert_eq!(RowAngle::new(180.0).degrees(), 0.0);
        assert!((RowAngle::new(89.0).distance(RowAngle::new(-89.0)) - 2.0).abs() < 1e-12);
    }

    fn digital_line(w: usize, h: usize, theta: f64, through: (f64, f64)) -> (BinaryMask, f64) {
        let (s, c) = theta.to_radians().sin_cos();
        let rho = (through.0 * c + through.1 * s).round();
        let mut mask = BinaryMask::empty(w, h);
        if c.abs() >= s.abs() {
            for y in 0..h {
                let x = ((rho - y as f64 * s) / c).round();
                if x >= 0.0 && x < w as f64 {
                    mask.set(x as usize, y, true);
                }
            }
        } else {
            for x in 0..w {
                let y = ((rho - x as f64 * c) / s).round();
                if y >= 0.0 && y < h as f64 {
                    mask.set(x, y as usize, true);
                }
            }
        }
        (mask, rho)
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        #[test]
        fn votes_are_conserved(bits in proptest::collection::vec(any::<bool>(), 20 * 12)) {
            let mask = BinaryMask::new(20, 12, bits).unwrap();
            let acc = hough_transform(&mask, 3.0, 1.5).unwrap();
            prop_assert_eq!(acc.total_votes(), (mask.count_white() * acc.theta_bins()) as u64);
        }

        #[test]
        fn chunked_equals_sequential(bits in proptest::collection::vec(any::<bool>(), 24 * 24), chunks in 1usize..7) {
            let mask = BinaryMask::new(24, 24, bits).unwrap();
            let seq = hough_transform(&mask, 2.0, 1.0).unwrap();
            let par = hough_transform_chunked(&mask, 2.0, 1.0, chunks).unwrap();
            prop_assert_eq!(seq, par);
        }

        #[test]
        fn recovers_bin_center_lines(bin in 0usize..360, cx in 90.0f64..110.0, cy in 90.0f64..110.0) {
            let theta = bin as f64 * 0.5;
            let (mask, rho) = digital_line(200, 200, theta, (cx, cy));
            let length = mask.count_white();
            prop_assume!(length >= 50);
            let acc = hough_transform(&mask, 0.5, 1.0).unwrap();
            let peaks = find_peaks(&acc, (0.6 * length as f64) as u32, (2, 2));
            let hit = peaks.iter().any(|p| {
                let same = (p.theta - theta).abs() < 1e-9 && (p.rho - rho).abs() <= 1.5;
                // θ = 0 is also reachable as θ → 180 with mirrored ρ
                let wrapped = (p.theta + 180.0 - theta).abs() < 1e-9 && (p.rho + rho).abs() <= 1.5;
                same || wrapped
            });
            prop_assert!(hit, "θ={} ρ={} peaks={:?}", theta, rho, peaks);
        }

        #[test]
        fn angle_conversion_is_bijective(bin in 0usize..360) {
            let theta = bin as f64 * 0.5;
            let a = angle_from_vertical(&LineRT { rho: 0.0, theta, votes: 1 });
            prop_assert!(a.degrees() > -90.0 && a.degrees() <= 90.0);
            prop_assert_eq!(a.normal_theta(), theta);
        }
    }
}
