//! Image containers, PGM/PNG decoding, mask binarization and row overlays.
//!
//! PGM (P2 and P5, maxval up to 255) is the canonical interchange format for
//! masks and is written bit-exactly by [`encode_mask`]. PNG is read-only.

use std::fmt;
use std::path::Path;

use thiserror::Error;

use crate::rowcluster::CropRow;

/// 8-bit grayscale image, row-major.
#[derive(Clone, PartialEq, Eq)]
pub struct GrayImage {
    width: usize,
    height: usize,
    samples: Vec<u8>,
}

/// 8-bit RGB image, row-major.
#[derive(Clone, PartialEq, Eq)]
pub struct RgbImage {
    width: usize,
    height: usize,
    samples: Vec<[u8; 3]>,
}

/// Boolean pixel grid. `true` is a white (crop-row) pixel.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct BinaryMask {
    width: usize,
    height: usize,
    bits: Vec<bool>,
}

/// Raised when constructing an image whose buffer does not match its size.
#[derive(Debug, Error, PartialEq, Eq)]
#[error("invalid image shape {width}x{height} with {len} samples")]
pub struct ShapeError {
    pub width: usize,
    pub height: usize,
    pub len: usize,
}

fn check_shape(width: usize, height: usize, len: usize) -> Result<(), ShapeError> {
    if width == 0 || height == 0 || width.checked_mul(height) != Some(len) {
        return Err(ShapeError { width, height, len });
    }
    Ok(())
}

macro_rules! grid_accessors {
    ($ty:ty, $field:ident, $px:ty) => {
        impl $ty {
            pub fn width(&self) -> usize {
                self.width
            }

            pub fn height(&self) -> usize {
                self.height
            }

            pub fn dimensions(&self) -> (usize, usize) {
                (self.width, self.height)
            }

            /// Pixel at column `x`, row `y`. Panics when out of bounds.
            pub fn get(&self, x: usize, y: usize) -> $px {
                assert!(x < self.width && y < self.height, "pixel ({x},{y}) out of bounds");
                self.$field[y * self.width + x]
            }

            pub fn set(&mut self, x: usize, y: usize, value: $px) {
                assert!(x < self.width && y < self.height, "pixel ({x},{y}) out of bounds");
                self.$field[y * self.width + x] = value;
            }
        }
    };
}

grid_accessors!(GrayImage, samples, u8);
grid_accessors!(RgbImage, samples, [u8; 3]);
grid_accessors!(BinaryMask, bits, bool);

impl GrayImage {
    pub fn new(width: usize, height: usize, samples: Vec<u8>) -> Result<Self, ShapeError> {
        check_shape(width, height, samples.len())?;
        Ok(Self { width, height, samples })
    }

    pub fn filled(width: usize, height: usize, value: u8) -> Self {
        assert!(width > 0 && height > 0, "empty image");
        Self { width, height, samples: vec![value; width * height] }
    }

    pub fn samples(&self) -> &[u8] {
        &self.samples
    }

    /// Gray replicated into all three channels.
    pub fn to_rgb(&self) -> RgbImage {
        RgbImage { width: self.width, height: self.height, samples: self.samples.iter().map(|&v| [v, v, v]).collect() }
    }
}

impl RgbImage {
    pub fn new(width: usize, height: usize, samples: Vec<[u8; 3]>) -> Result<Self, ShapeError> {
        check_shape(width, height, samples.len())?;
        Ok(Self { width, height, samples })
    }

    pub fn filled(width: usize, height: usize, color: [u8; 3]) -> Self {
        assert!(width > 0 && height > 0, "empty image");
        Self { width, height, samples: vec![color; width * height] }
    }

    pub fn samples(&self) -> &[[u8; 3]] {
        &self.samples
    }

    /// Integer BT.601 luma.
    pub fn to_gray(&self) -> GrayImage {
        let samples = self
            .samples
            .iter()
            .map(|&[r, g, b]| ((299 * r as u32 + 587 * g as u32 + 114 * b as u32 + 500) / 1000) as u8)
            .collect();
        GrayImage { width: self.width, height: self.height, samples }
    }
}

impl BinaryMask {
    pub fn new(width: usize, height: usize, bits: Vec<bool>) -> Result<Self, ShapeError> {
        check_shape(width, height, bits.len())?;
        Ok(Self { width, height, bits })
    }

    /// All-black mask.
    pub fn empty(width: usize, height: usize) -> Self {
        assert!(width > 0 && height > 0, "empty image");
        Self { width, height, bits: vec![false; width * height] }
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> bool) -> Self {
        assert!(width > 0 && height > 0, "empty image");
        let mut bits = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                bits.push(f(x, y));
            }
        }
        Self { width, height, bits }
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    pub fn count_white(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    pub fn is_empty(&self) -> bool {
        !self.bits.iter().any(|&b| b)
    }

    /// Coordinates of white pixels in raster order.
    pub fn white_pixels(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        let w = self.width;
        self.bits.iter().enumerate().filter(|(_, &b)| b).map(move |(i, _)| (i % w, i / w))
    }

    /// White renders as 255, black as 0.
    pub fn to_gray(&self) -> GrayImage {
        GrayImage {
            width: self.width,
            height: self.height,
            samples: self.bits.iter().map(|&b| if b { 255 } else { 0 }).collect(),
        }
    }
}

impl fmt::Debug for GrayImage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "GrayImage({}x{})", self.width, self.height)
    }
}

impl fmt::Debug for RgbImage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "RgbImage({}x{})", self.width, self.height)
    }
}

impl fmt::Debug for BinaryMask {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "BinaryMask({}x{}, {} white)", self.width, self.height, self.count_white())
    }
}

/// A decoded raster, gray or color depending on the source.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum DecodedImage {
    Gray(GrayImage),
    Rgb(RgbImage),
}

impl DecodedImage {
    pub fn dimensions(&self) -> (usize, usize) {
        match self {
            DecodedImage::Gray(g) => g.dimensions(),
            DecodedImage::Rgb(c) => c.dimensions(),
        }
    }

    pub fn into_gray(self) -> GrayImage {
        match self {
            DecodedImage::Gray(g) => g,
            DecodedImage::Rgb(c) => c.to_gray(),
        }
    }

    pub fn into_rgb(self) -> RgbImage {
        match self {
            DecodedImage::Gray(g) => g.to_rgb(),
            DecodedImage::Rgb(c) => c,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ImageFormat {
    /// Netpbm gray, `P2` or `P5`.
    Pgm,
    /// Netpbm color, `P3` or `P6`.
    Ppm,
    Png,
}

impl ImageFormat {
    /// Sniffs the format from magic bytes.
    pub fn detect(bytes: &[u8]) -> Option<Self> {
        if bytes.starts_with(b"\x89PNG\r\n\x1a\n") {
            Some(ImageFormat::Png)
        } else if bytes.starts_with(b"P2") || bytes.starts_with(b"P5") {
            Some(ImageFormat::Pgm)
        } else if bytes.starts_with(b"P3") || bytes.starts_with(b"P6") {
            Some(ImageFormat::Ppm)
        } else {
            None
        }
    }
}

#[derive(Debug, Error)]
pub enum DecodeError {
    #[error("malformed header at byte {offset}: {reason}")]
    Header { offset: usize, reason: String },
    #[error("truncated payload: expected {expected} samples, found {found}")]
    Truncated { expected: usize, found: usize },
    #[error("unsupported bit depth: {0}")]
    UnsupportedDepth(String),
    #[error("sample {value} at byte {offset} exceeds maxval {maxval}")]
    SampleRange { offset: usize, value: u32, maxval: u32 },
    #[error("unrecognized image format")]
    UnknownFormat,
    #[error("png: {0}")]
    Png(String),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    File {
        path: String,
        #[source]
        source: Box<DecodeError>,
    },
}

/// Decodes a PGM, PPM or PNG byte stream.
pub fn decode_image(bytes: &[u8], format: ImageFormat) -> Result<DecodedImage, DecodeError> {
    match format {
        ImageFormat::Pgm => {
            let (width, height, samples) = decode_netpbm(bytes, 1)?;
            Ok(DecodedImage::Gray(GrayImage { width, height, samples }))
        }
        ImageFormat::Ppm => {
            let (width, height, samples) = decode_netpbm(bytes, 3)?;
            let samples = samples.chunks_exact(3).map(|c| [c[0], c[1], c[2]]).collect();
            Ok(DecodedImage::Rgb(RgbImage { width, height, samples }))
        }
        ImageFormat::Png => decode_png(bytes),
    }
}

/// Decodes with the format sniffed from the content.
pub fn decode_auto(bytes: &[u8]) -> Result<DecodedImage, DecodeError> {
    let format = ImageFormat::detect(bytes).ok_or(DecodeError::UnknownFormat)?;
    decode_image(bytes, format)
}

pub fn read_image(path: &Path) -> Result<DecodedImage, DecodeError> {
    let bytes = std::fs::read(path).map_err(|source| DecodeError::Io { path: path.display().to_string(), source })?;
    decode_auto(&bytes).map_err(|e| DecodeError::File { path: path.display().to_string(), source: Box::new(e) })
}

struct PgmHeaderReader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> PgmHeaderReader<'a> {
    fn skip_whitespace_and_comments(&mut self) {
        while self.pos < self.bytes.len() {
            match self.bytes[self.pos] {
                b' ' | b'\t' | b'\n' | b'\r' | 0x0b | 0x0c => self.pos += 1,
                b'#' => {
                    while self.pos < self.bytes.len() && self.bytes[self.pos] != b'\n' {
                        self.pos += 1;
                    }
                }
                _ => break,
            }
        }
    }

    fn number(&mut self, what: &str) -> Result<u32, DecodeError> {
        self.skip_whitespace_and_comments();
        let start = self.pos;
        while self.pos < self.bytes.len() && self.bytes[self.pos].is_ascii_digit() {
            self.pos += 1;
        }
        if start == self.pos {
            return Err(DecodeError::Header { offset: start, reason: format!("expected {what}") });
        }
        std::str::from_utf8(&self.bytes[start..self.pos])
            .ok()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| DecodeError::Header { offset: start, reason: format!("{what} out of range") })
    }
}

/// Netpbm with `channels` samples per pixel: 1 for P2/P5, 3 for P3/P6.
fn decode_netpbm(bytes: &[u8], channels: usize) -> Result<(usize, usize, Vec<u8>), DecodeError> {
    let (ascii, raw, magic) = if channels == 1 { (b'2', b'5', "P2/P5") } else { (b'3', b'6', "P3/P6") };
    if bytes.len() < 2 || bytes[0] != b'P' {
        return Err(DecodeError::Header { offset: 0, reason: format!("missing {magic} magic") });
    }
    let binary = match bytes[1] {
        b if b == raw => true,
        b if b == ascii => false,
        _ => return Err(DecodeError::Header { offset: 1, reason: format!("missing {magic} magic") }),
    };
    let mut rd = PgmHeaderReader { bytes, pos: 2 };
    let width = rd.number("width")? as usize;
    let height = rd.number("height")? as usize;
    let maxval_offset = rd.pos;
    let maxval = rd.number("maxval")?;
    if width == 0 || height == 0 {
        return Err(DecodeError::Header { offset: 2, reason: "zero dimension".into() });
    }
    if maxval == 0 {
        return Err(DecodeError::Header { offset: maxval_offset, reason: "maxval is zero".into() });
    }
    if maxval > 255 {
        return Err(DecodeError::UnsupportedDepth(format!("maxval {maxval} (16-bit netpbm)")));
    }
    let count = width
        .checked_mul(height)
        .and_then(|n| n.checked_mul(channels))
        .ok_or_else(|| DecodeError::Header { offset: 2, reason: "dimensions overflow".into() })?;

    let samples = if binary {
        // exactly one whitespace byte separates maxval from the raster
        if rd.pos >= bytes.len() || !bytes[rd.pos].is_ascii_whitespace() {
            return Err(DecodeError::Header { offset: rd.pos, reason: "expected whitespace after maxval".into() });
        }
        let start = rd.pos + 1;
        let payload = &bytes[start..];
        if payload.len() < count {
            return Err(DecodeError::Truncated { expected: count, found: payload.len() });
        }
        let payload = &payload[..count];
        if let Some(i) = payload.iter().position(|&v| u32::from(v) > maxval) {
            return Err(DecodeError::SampleRange { offset: start + i, value: payload[i] as u32, maxval });
        }
        payload.to_vec()
    } else {
        let mut samples = Vec::with_capacity(count);
        for found in 0..count {
            rd.skip_whitespace_and_comments();
            if rd.pos >= bytes.len() {
                return Err(DecodeError::Truncated { expected: count, found });
            }
            let offset = rd.pos;
            let value = rd.number("sample")?;
            if value > maxval {
                return Err(DecodeError::SampleRange { offset, value, maxval });
            }
            samples.push(value as u8);
        }
        samples
    };
    Ok((width, height, samples))
}

fn decode_png(bytes: &[u8]) -> Result<DecodedImage, DecodeError> {
    let mut decoder = png::Decoder::new(bytes);
    // palette and sub-byte depths expand to 8-bit; 16-bit is left as-is and rejected below
    decoder.set_transformations(png::Transformations::EXPAND);
    let mut reader = decoder.read_info().map_err(|e| DecodeError::Png(e.to_string()))?;
    let mut buf = vec![0; reader.output_buffer_size()];
    let info = reader.next_frame(&mut buf).map_err(|e| DecodeError::Png(e.to_string()))?;
    if info.bit_depth != png::BitDepth::Eight {
        return Err(DecodeError::UnsupportedDepth(format!("png {:?}", info.bit_depth)));
    }
    let (width, height) = (info.width as usize, info.height as usize);
    let data = &buf[..info.buffer_size()];
    let stride = info.line_size;
    let pixels = |channels: usize| (0..height).flat_map(move |y| (0..width).map(move |x| y * stride + x * channels));
    let image = match info.color_type {
        png::ColorType::Grayscale => {
            DecodedImage::Gray(GrayImage { width, height, samples: pixels(1).map(|i| data[i]).collect() })
        }
        png::ColorType::GrayscaleAlpha => {
            DecodedImage::Gray(GrayImage { width, height, samples: pixels(2).map(|i| data[i]).collect() })
        }
        png::ColorType::Rgb => DecodedImage::Rgb(RgbImage {
            width,
            height,
            samples: pixels(3).map(|i| [data[i], data[i + 1], data[i + 2]]).collect(),
        }),
        png::ColorType::Rgba => DecodedImage::Rgb(RgbImage {
            width,
            height,
            samples: pixels(4).map(|i| [data[i], data[i + 1], data[i + 2]]).collect(),
        }),
        other => return Err(DecodeError::UnsupportedDepth(format!("png color type {other:?}"))),
    };
    Ok(image)
}

/// A bit is set iff the sample is at least `threshold`.
pub fn binarize(img: &GrayImage, threshold: u8) -> BinaryMask {
    BinaryMask { width: img.width, height: img.height, bits: img.samples.iter().map(|&v| v >= threshold).collect() }
}

fn pgm_header(magic: &str, width: usize, height: usize) -> Vec<u8> {
    format!("{magic}\n{width} {height}\n255\n").into_bytes()
}

/// Encodes a mask as binary PGM (P5, maxval 255, white = 255).
pub fn encode_mask(mask: &BinaryMask) -> Vec<u8> {
    let mut out = pgm_header("P5", mask.width, mask.height);
    out.extend(mask.bits.iter().map(|&b| if b { 255u8 } else { 0 }));
    out
}

pub fn encode_gray(img: &GrayImage) -> Vec<u8> {
    let mut out = pgm_header("P5", img.width, img.height);
    out.extend_from_slice(&img.samples);
    out
}

/// Binary PPM (P6) for color output such as overlays.
pub fn encode_rgb_ppm(img: &RgbImage) -> Vec<u8> {
    let mut out = pgm_header("P6", img.width, img.height);
    out.extend(img.samples.iter().flatten());
    out
}

/// Endpoints of the segment where the line `x·cosθ + y·sinθ = ρ` crosses the
/// pixel-center rectangle `[0, w-1] × [0, h-1]`, or `None` if it misses.
pub(crate) fn clip_line(theta_deg: f64, rho: f64, width: usize, height: usize) -> Option<((f64, f64), (f64, f64))> {
    let (s, c) = theta_deg.to_radians().sin_cos();
    let (xmax, ymax) = ((width - 1) as f64, (height - 1) as f64);
    // Point on the line and its direction.
    let (px, py) = (rho * c, rho * s);
    let (dx, dy) = (-s, c);
    let mut t0 = f64::NEG_INFINITY;
    let mut t1 = f64::INFINITY;
    for (p, d, lo, hi) in [(px, dx, 0.0, xmax), (py, dy, 0.0, ymax)] {
        if d.abs() < 1e-12 {
            if p < lo - 1e-9 || p > hi + 1e-9 {
                return None;
            }
        } else {
            let (a, b) = ((lo - p) / d, (hi - p) / d);
            t0 = t0.max(a.min(b));
            t1 = t1.min(a.max(b));
        }
    }
    if t0 > t1 + 1e-9 {
        return None;
    }
    Some(((px + t0 * dx, py + t0 * dy), (px + t1 * dx, py + t1 * dy)))
}

/// Integer Bresenham walk between two pixels, inclusive.
pub(crate) fn bresenham(from: (i64, i64), to: (i64, i64), mut plot: impl FnMut(i64, i64)) {
    let (mut x, mut y) = from;
    let dx = (to.0 - x).abs();
    let dy = -(to.1 - y).abs();
    let sx = if x < to.0 { 1 } else { -1 };
    let sy = if y < to.1 { 1 } else { -1 };
    let mut err = dx + dy;
    loop {
        plot(x, y);
        if (x, y) == to {
            break;
        }
        let e2 = 2 * err;
        if e2 >= dy {
            err += dy;
            x += sx;
        }
        if e2 <= dx {
            err += dx;
            y += sy;
        }
    }
}

/// Draws every row as a 1-px line clipped to the image, on a copy of `img`.
pub fn overlay_rows(img: &RgbImage, rows: &[CropRow], color: [u8; 3]) -> RgbImage {
    let mut out = img.clone();
    let (w, h) = (img.width as i64, img.height as i64);
    for row in rows {
        let Some((a, b)) = clip_line(row.angle.normal_theta(), row.rho, img.width, img.height) else {
            continue;
        };
        let round = |p: (f64, f64)| (p.0.round() as i64, p.1.round() as i64);
        bresenham(round(a), round(b), |x, y| {
            if (0..w).contains(&x) && (0..h).contains(&y) {
                out.samples[(y * w + x) as usize] = color;
            }
        });
    }
    out
}
