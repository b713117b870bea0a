//! Skeletonization, excess-green index and Otsu thresholding.

use serde::{Deserialize, Serialize};

use crate::imagecore::{BinaryMask, GrayImage, RgbImage};

/// Default cap on thinning passes.
pub const DEFAULT_MAX_THIN_ITERATIONS: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ThinningReport {
    /// Full passes (both sub-iterations) executed.
    pub iterations: usize,
    pub removed_pixels: usize,
    /// False when `max_iterations` was hit before a fixpoint.
    pub converged: bool,
}

/// Zhang–Suen thinning until no pixel is removable or `max_iterations`
/// passes have run.
///
/// Each sub-iteration flags deletable pixels against the unmodified image,
/// as in the textbook algorithm. Flagged pixels are then removed in raster
/// order, skipping any that stopped being simple (crossing number 1 with
/// 2..=6 white neighbours) after an earlier removal in the same batch. On
/// ordinary strokes the two agree; the recheck only bites on 2x2 blocks and
/// two-pixel-thick diagonals, which parallel deletion would erase outright.
/// Pixels outside the image count as black.
pub fn skeletonize(mask: &BinaryMask, max_iterations: usize) -> (BinaryMask, ThinningReport) {
    let (w, h) = mask.dimensions();
    let pw = w + 2;
    // zero-padded copy so neighbour lookups need no bounds checks
    let mut grid = vec![0u8; pw * (h + 2)];
    let mut active = Vec::new();
    for (x, y) in mask.white_pixels() {
        let i = (y + 1) * pw + x + 1;
        grid[i] = 1;
        active.push(i);
    }
    let offsets = neighbour_offsets(pw);
    let mut report = ThinningReport::default();
    let mut flagged = Vec::new();

    while report.iterations < max_iterations.max(1) {
        let mut removed_this_pass = 0;
        for step in 0..2 {
            flagged.clear();
            flagged.extend(active.iter().copied().filter(|&i| deletable(&grid, i, &offsets, step)));
            for &i in &flagged {
                let n = neighbours(&grid, i, &offsets);
                let b = n.iter().map(|&v| v as u32).sum::<u32>();
                if (2..=6).contains(&b) && crossings(&n) == 1 {
                    grid[i] = 0;
                    removed_this_pass += 1;
                }
            }
            active.retain(|&i| grid[i] == 1);
        }
        report.iterations += 1;
        report.removed_pixels += removed_this_pass;
        if removed_this_pass == 0 {
            report.converged = true;
            break;
        }
    }

    let mut out = BinaryMask::empty(w, h);
    for &i in &active {
        out.set(i % pw - 1, i / pw - 1, true);
    }
    (out, report)
}

/// Offsets of P2..P9: N, NE, E, SE, S, SW, W, NW.
fn neighbour_offsets(pw: usize) -> [isize; 8] {
    let pw = pw as isize;
    [-pw, -pw + 1, 1, pw + 1, pw, pw - 1, -1, -pw - 1]
}

#[inline]
fn neighbours(grid: &[u8], i: usize, offsets: &[isize; 8]) -> [u8; 8] {
    offsets.map(|o| grid[(i as isize + o) as usize])
}

/// Number of 0→1 transitions in the cyclic sequence P2, P3, …, P9, P2.
#[inline]
fn crossings(n: &[u8; 8]) -> u32 {
    (0..8).filter(|&k| n[k] == 0 && n[(k + 1) % 8] == 1).count() as u32
}

#[inline]
fn deletable(grid: &[u8], i: usize, offsets: &[isize; 8], step: usize) -> bool {
    let n = neighbours(grid, i, offsets);
    let b: u32 = n.iter().map(|&v| v as u32).sum();
    if !(2..=6).contains(&b) || crossings(&n) != 1 {
        return false;
    }
    let [p2, _, p4, _, p6, _, p8, _] = n;
    if step == 0 {
        p2 * p4 * p6 == 0 && p4 * p6 * p8 == 0
    } else {
        p2 * p4 * p8 == 0 && p2 * p6 * p8 == 0
    }
}

/// Excess-green index on chromatic coordinates, mapped to 8 bits.
///
/// `ExG = 2g − r − b` with `r = R/S`, `g = G/S`, `b = B/S`, `S = R+G+B`
/// (ExG = 0 when S = 0); the range `[-1, 2]` maps to `floor((ExG+1)/3·255)`.
pub fn excess_green(img: &RgbImage) -> GrayImage {
    let samples = img.samples().iter().map(|&px| exg_byte(px)).collect();
    GrayImage::new(img.width(), img.height(), samples).expect("shape preserved")
}

fn exg_byte([r, g, b]: [u8; 3]) -> u8 {
    let s = r as u32 + g as u32 + b as u32;
    if s == 0 {
        return 85;
    }
    // (ExG + 1) / 3 = (2G − R − B + S) / (3S) = G / S exactly, so the mapped
    // value is floor(255·G / S) and integer arithmetic is exact.
    (255 * g as u32 / s) as u8
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct OtsuThreshold {
    /// Pixels `<= threshold` form the dark class.
    pub threshold: u8,
    /// Set for constant images, where every split is empty on one side.
    pub degenerate: bool,
}

/// Smallest threshold maximizing Otsu's between-class variance.
pub fn otsu_threshold(img: &GrayImage) -> OtsuThreshold {
    let mut hist = [0u64; 256];
    for &v in img.samples() {
        hist[v as usize] += 1;
    }
    otsu_from_histogram(&hist)
}

pub fn otsu_from_histogram(hist: &[u64; 256]) -> OtsuThreshold {
    let total: u64 = hist.iter().sum();
    let occupied = hist.iter().filter(|&&c| c > 0).count();
    if occupied <= 1 {
        return OtsuThreshold { threshold: 127, degenerate: true };
    }
    let sum_all: u128 = hist.iter().enumerate().map(|(v, &c)| v as u128 * c as u128).sum();
    // Maximize w0·w1·(μ0 − μ1)², compared exactly in integers:
    // w0·w1·(μ0−μ1)² = (sum0·n1 − sum1·n0)² / (n0·n1)  (up to the constant 1/N²).
    let mut best = (0u8, 0u128, 1u128);
    let (mut n0, mut sum0) = (0u128, 0u128);
    for (t, &count) in hist.iter().enumerate() {
        n0 += count as u128;
        sum0 += t as u128 * count as u128;
        let n1 = total as u128 - n0;
        if n0 == 0 || n1 == 0 {
            continue;
        }
        let sum1 = sum_all - sum0;
        let diff = (sum0 * n1).abs_diff(sum1 * n0);
        let num = diff * diff;
        let den = n0 * n1;
        // num/den > best_num/best_den
        if num * best.2 > best.1 * den {
            best = (t as u8, num, den);
        }
    }
    OtsuThreshold { threshold: best.0, degenerate: false }
}
