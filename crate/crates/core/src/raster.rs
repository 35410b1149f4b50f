//! Image containers, loading, and Otsu binarization.
//!
//! Binary images follow the ink-is-foreground convention: `true` is ink no
//! matter what the polarity of the scanned source was.

use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum RasterError {
    #[error("cannot read {path}: {source}")]
    Unreadable {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("unsupported image format in {path}: {reason}")]
    UnsupportedFormat { path: String, reason: String },
    #[error("image dimensions must be at least 1x1, got {width}x{height}")]
    EmptyImage { width: usize, height: usize },
    #[error("pixel buffer has {actual} entries, expected {expected}")]
    BufferSize { expected: usize, actual: usize },
}

/// 8-bit luminance image, row-major.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GrayImage {
    width: usize,
    height: usize,
    data: Vec<u8>,
}

impl GrayImage {
    pub fn new(width: usize, height: usize, data: Vec<u8>) -> Result<Self, RasterError> {
        if width == 0 || height == 0 {
            return Err(RasterError::EmptyImage { width, height });
        }
        if data.len() != width * height {
            return Err(RasterError::BufferSize {
                expected: width * height,
                actual: data.len(),
            });
        }
        Ok(Self {
            width,
            height,
            data,
        })
    }

    pub fn filled(width: usize, height: usize, value: u8) -> Result<Self, RasterError> {
        Self::new(width, height, vec![value; width * height])
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn get(&self, x: usize, y: usize) -> u8 {
        self.data[y * self.width + x]
    }

    pub fn set(&mut self, x: usize, y: usize, value: u8) {
        self.data[y * self.width + x] = value;
    }

    pub fn pixels(&self) -> &[u8] {
        &self.data
    }

    /// Intensity histogram with one bin per gray level.
    pub fn histogram(&self) -> [u64; 256] {
        let mut hist = [0u64; 256];
        for &v in &self.data {
            hist[v as usize] += 1;
        }
        hist
    }
}

/// Two-level image; `true` marks ink.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct BinaryImage {
    width: usize,
    height: usize,
    data: Vec<bool>,
}

impl std::fmt::Debug for BinaryImage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        writeln!(f, "BinaryImage {}x{}", self.width, self.height)?;
        for y in 0..self.height {
            let row: String = (0..self.width)
                .map(|x| if self.get(x, y) { '#' } else { '.' })
                .collect();
            writeln!(f, "{row}")?;
        }
        Ok(())
    }
}

impl BinaryImage {
    /// All-background image. Zero-sized images are allowed here so that
    /// callers can represent empty crops; loaders reject them.
    pub fn new(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            data: vec![false; width * height],
        }
    }

    pub fn from_vec(width: usize, height: usize, data: Vec<bool>) -> Result<Self, RasterError> {
        if data.len() != width * height {
            return Err(RasterError::BufferSize {
                expected: width * height,
                actual: data.len(),
            });
        }
        Ok(Self {
            width,
            height,
            data,
        })
    }

    /// Parses rows of `#` (ink) and any other character (background).
    /// Handy for fixtures; all rows must have the same length.
    pub fn from_ascii(rows: &[&str]) -> Self {
        let height = rows.len();
        let width = rows.first().map_or(0, |r| r.chars().count());
        let mut img = Self::new(width, height);
        for (y, row) in rows.iter().enumerate() {
            assert_eq!(row.chars().count(), width, "ragged ascii fixture");
            for (x, c) in row.chars().enumerate() {
                img.set(x, y, c == '#');
            }
        }
        img
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn get(&self, x: usize, y: usize) -> bool {
        self.data[y * self.width + x]
    }

    /// Bounds-checked read; anything outside the image is background.
    pub fn get_signed(&self, x: i64, y: i64) -> bool {
        if x < 0 || y < 0 || x >= self.width as i64 || y >= self.height as i64 {
            false
        } else {
            self.data[y as usize * self.width + x as usize]
        }
    }

    pub fn set(&mut self, x: usize, y: usize, value: bool) {
        self.data[y * self.width + x] = value;
    }

    pub fn pixels(&self) -> &[bool] {
        &self.data
    }

    pub fn count_foreground(&self) -> usize {
        self.data.iter().filter(|&&b| b).count()
    }

    pub fn is_blank(&self) -> bool {
        !self.data.iter().any(|&b| b)
    }

    pub fn foreground_pixels(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        let w = self.width;
        self.data
            .iter()
            .enumerate()
            .filter(|(_, &b)| b)
            .map(move |(i, _)| (i % w, i / w))
    }

    pub fn column(&self, x: usize) -> impl Iterator<Item = bool> + '_ {
        (0..self.height).map(move |y| self.get(x, y))
    }

    /// Nearest-neighbour enlargement by an integer factor.
    pub fn upscale(&self, factor: usize) -> BinaryImage {
        let mut out = BinaryImage::new(self.width * factor, self.height * factor);
        for (x, y) in self.foreground_pixels() {
            for dy in 0..factor {
                for dx in 0..factor {
                    out.set(x * factor + dx, y * factor + dy, true);
                }
            }
        }
        out
    }

    /// Copy of the `w`x`h` region at (`x0`,`y0`); parts outside the source
    /// read as background.
    pub fn crop(&self, x0: i64, y0: i64, w: usize, h: usize) -> BinaryImage {
        let mut out = BinaryImage::new(w, h);
        for y in 0..h {
            for x in 0..w {
                if self.get_signed(x0 + x as i64, y0 + y as i64) {
                    out.set(x, y, true);
                }
            }
        }
        out
    }

    /// Bounding box of the ink as (x0, y0, x1, y1), inclusive.
    pub fn ink_bbox(&self) -> Option<(usize, usize, usize, usize)> {
        let mut bbox: Option<(usize, usize, usize, usize)> = None;
        for (x, y) in self.foreground_pixels() {
            bbox = Some(match bbox {
                None => (x, y, x, y),
                Some((x0, y0, x1, y1)) => (x0.min(x), y0.min(y), x1.max(x), y1.max(y)),
            });
        }
        bbox
    }

    /// Renders ink as black on white, the way the page would be printed.
    pub fn to_gray_printed(&self) -> GrayImage {
        let data = self
            .data
            .iter()
            .map(|&b| if b { 0 } else { 255 })
            .collect();
        GrayImage {
            width: self.width.max(1),
            height: self.height.max(1),
            data,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BinarizeReport {
    pub threshold: u8,
    pub foreground_fraction: f64,
    pub inverted: bool,
}

/// BT.601 luma with round-half-up, in exact integer arithmetic.
pub fn luma_bt601(r: u8, g: u8, b: u8) -> u8 {
    let weighted = 299 * r as u32 + 587 * g as u32 + 114 * b as u32;
    ((weighted + 500) / 1000) as u8
}

fn rescale_16(v: u16) -> u8 {
    ((v as u32 * 255 + 32_767) / 65_535) as u8
}

/// Loads a PNG (8/16-bit gray or RGB, optionally with alpha) or a binary
/// PGM (P5) as a luminance image.
pub fn load_image(path: impl AsRef<Path>) -> Result<GrayImage, RasterError> {
    let path = path.as_ref();
    let shown = path.display().to_string();
    let bytes = std::fs::read(path).map_err(|source| RasterError::Unreadable {
        path: shown.clone(),
        source,
    })?;
    decode_image(&bytes).map_err(|reason| RasterError::UnsupportedFormat {
        path: shown,
        reason,
    })
}

/// Decodes PNG or P5 PGM bytes; the format is sniffed from the magic.
pub fn decode_image(bytes: &[u8]) -> Result<GrayImage, String> {
    use image::{DynamicImage, ImageFormat};

    let format = if bytes.starts_with(b"\x89PNG\r\n\x1a\n") {
        ImageFormat::Png
    } else if bytes.starts_with(b"P5") {
        ImageFormat::Pnm
    } else {
        return Err("expected PNG or binary PGM (P5)".into());
    };
    let decoded = image::load_from_memory_with_format(bytes, format).map_err(|e| e.to_string())?;
    let (width, height) = (decoded.width() as usize, decoded.height() as usize);
    let data: Vec<u8> = match decoded {
        DynamicImage::ImageLuma8(img) => img.into_raw(),
        DynamicImage::ImageLumaA8(img) => img.pixels().map(|p| p.0[0]).collect(),
        DynamicImage::ImageLuma16(img) => img.pixels().map(|p| rescale_16(p.0[0])).collect(),
        DynamicImage::ImageLumaA16(img) => img.pixels().map(|p| rescale_16(p.0[0])).collect(),
        DynamicImage::ImageRgb8(img) => img
            .pixels()
            .map(|p| luma_bt601(p.0[0], p.0[1], p.0[2]))
            .collect(),
        DynamicImage::ImageRgba8(img) => img
            .pixels()
            .map(|p| luma_bt601(p.0[0], p.0[1], p.0[2]))
            .collect(),
        DynamicImage::ImageRgb16(img) => img
            .pixels()
            .map(|p| luma_bt601(rescale_16(p.0[0]), rescale_16(p.0[1]), rescale_16(p.0[2])))
            .collect(),
        DynamicImage::ImageRgba16(img) => img
            .pixels()
            .map(|p| luma_bt601(rescale_16(p.0[0]), rescale_16(p.0[1]), rescale_16(p.0[2])))
            .collect(),
        other => return Err(format!("unsupported pixel layout {:?}", other.color())),
    };
    GrayImage::new(width, height, data).map_err(|e| e.to_string())
}

/// Encodes a gray image as PNG.
pub fn encode_png(img: &GrayImage) -> Vec<u8> {
    let buf = image::GrayImage::from_raw(img.width as u32, img.height as u32, img.data.clone())
        .expect("buffer size checked at construction");
    let mut out = std::io::Cursor::new(Vec::new());
    buf.write_to(&mut out, image::ImageFormat::Png)
        .expect("in-memory PNG encoding");
    out.into_inner()
}

/// Writes a binary image as a P5 PGM mask: ink = 255, background = 0.
pub fn encode_pgm_mask(img: &BinaryImage) -> Vec<u8> {
    let mut out = format!("P5\n{} {}\n255\n", img.width, img.height).into_bytes();
    out.extend(img.data.iter().map(|&b| if b { 255u8 } else { 0 }));
    out
}

/// Reads a P5 mask written by [`encode_pgm_mask`]; nonzero is ink.
pub fn decode_pgm_mask(bytes: &[u8]) -> Result<BinaryImage, String> {
    let gray = decode_image(bytes)?;
    let data = gray.data.iter().map(|&v| v != 0).collect();
    BinaryImage::from_vec(gray.width, gray.height, data).map_err(|e| e.to_string())
}

/// Otsu threshold over a histogram: the smallest `t` maximizing the
/// between-class variance of {v <= t} vs {v > t}. `None` when fewer than two
/// gray levels occur.
pub fn otsu_threshold(hist: &[u64; 256]) -> Option<u8> {
    let total: u64 = hist.iter().sum();
    let total_sum: f64 = hist
        .iter()
        .enumerate()
        .map(|(v, &n)| v as f64 * n as f64)
        .sum();
    let mut below = 0u64;
    let mut below_sum = 0f64;
    let mut best: Option<(u8, f64)> = None;
    for t in 0..255usize {
        below += hist[t];
        below_sum += t as f64 * hist[t] as f64;
        let above = total - below;
        if below == 0 || above == 0 {
            continue;
        }
        let w0 = below as f64 / total as f64;
        let w1 = above as f64 / total as f64;
        let mu0 = below_sum / below as f64;
        let mu1 = (total_sum - below_sum) / above as f64;
        let between = w0 * w1 * (mu0 - mu1) * (mu0 - mu1);
        if best.is_none_or(|(_, b)| between > b) {
            best = Some((t as u8, between));
        }
    }
    best.map(|(t, _)| t)
}

/// Global Otsu binarization followed by the auto-polarity rule: if more than
/// half the pixels came out as ink, the result is inverted.
pub fn binarize_otsu(img: &GrayImage) -> (BinaryImage, BinarizeReport) {
    let npix = img.data.len();
    let Some(threshold) = otsu_threshold(&img.histogram()) else {
        let report = BinarizeReport {
            threshold: img.data[0],
            foreground_fraction: 0.0,
            inverted: false,
        };
        return (BinaryImage::new(img.width, img.height), report);
    };
    let mut data: Vec<bool> = img.data.iter().map(|&v| v > threshold).collect();
    let mut ink = data.iter().filter(|&&b| b).count();
    let inverted = 2 * ink > npix;
    if inverted {
        data.iter_mut().for_each(|b| *b = !*b);
        ink = npix - ink;
    }
    let report = BinarizeReport {
        threshold,
        foreground_fraction: ink as f64 / npix as f64,
        inverted,
    };
    let bin = BinaryImage {
        width: img.width,
        height: img.height,
        data,
    };
    (bin, report)
}

pub fn negate(img: &BinaryImage) -> BinaryImage {
    BinaryImage {
        width: img.width,
        height: img.height,
        data: img.data.iter().map(|&b| !b).collect(),
    }
}
