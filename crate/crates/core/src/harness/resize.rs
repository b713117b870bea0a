//! Resampling for the whole-image protocol, where full camera frames are
//! squeezed to the network input size.

use crate::imagecore::{BinaryMask, GrayImage, RgbImage};

pub const GLOBAL_SIZE: (usize, usize) = (512, 512);

/// Source index for destination `d` under nearest-neighbour sampling.
fn nearest(d: usize, src: usize, dst: usize) -> usize {
    (((2 * d + 1) * src) / (2 * dst)).min(src - 1)
}

/// Nearest-neighbour, so masks stay binary.
pub fn resize_mask(mask: &BinaryMask, (w, h): (usize, usize)) -> BinaryMask {
    let (sw, sh) = mask.dimensions();
    if (sw, sh) == (w, h) {
        return mask.clone();
    }
    BinaryMask::from_fn(w, h, |x, y| mask.get(nearest(x, sw, w), nearest(y, sh, h)))
}

pub fn resize_gray(img: &GrayImage, (w, h): (usize, usize)) -> GrayImage {
    let (sw, sh) = img.dimensions();
    if (sw, sh) == (w, h) {
        return img.clone();
    }
    let samples = (0..h)
        .flat_map(|y| (0..w).map(move |x| (x, y)))
        .map(|(x, y)| img.get(nearest(x, sw, w), nearest(y, sh, h)))
        .collect();
    GrayImage::new(w, h, samples).expect("target size is nonzero")
}

/// Bilinear with pixel-center alignment and edge clamping.
pub fn resize_rgb(img: &RgbImage, (w, h): (usize, usize)) -> RgbImage {
    let (sw, sh) = img.dimensions();
    if (sw, sh) == (w, h) {
        return img.clone();
    }
    let axis = |d: usize, src: usize, dst: usize| {
        let pos = ((d as f64 + 0.5) * src as f64 / dst as f64 - 0.5).clamp(0.0, (src - 1) as f64);
        let i0 = pos.floor() as usize;
        (i0, (i0 + 1).min(src - 1), pos - i0 as f64)
    };
    let mut samples = Vec::with_capacity(w * h);
    for y in 0..h {
        let (y0, y1, fy) = axis(y, sh, h);
        for x in 0..w {
            let (x0, x1, fx) = axis(x, sw, w);
            let (a, b, c, d) = (img.get(x0, y0), img.get(x1, y0), img.get(x0, y1), img.get(x1, y1));
            let px = std::array::from_fn(|k| {
                let top = a[k] as f64 * (1.0 - fx) + b[k] as f64 * fx;
                let bottom = c[k] as f64 * (1.0 - fx) + d[k] as f64 * fx;
                (top * (1.0 - fy) + bottom * fy).round() as u8
            });
            samples.push(px);
        }
    }
    RgbImage::new(w, h, samples).expect("target size is nonzero")
}

/// Expected row angle after stretching the image by `(sx, sy)`: a row with
/// horizontal drift `tan θ` per vertical pixel drifts `tan θ · sx / sy`.
pub fn scaled_row_angle(degrees: f64, sx: f64, sy: f64) -> f64 {
    (degrees.to_radians().tan() * sx / sy).atan().to_degrees()
}
