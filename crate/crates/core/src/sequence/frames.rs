//! Sliding-window framing of text-line images.

use thiserror::Error;

use crate::raster::BinaryImage;
use crate::segmentation::ReadingOrder;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum FrameError {
    #[error("window width must be odd and at least 1, got {0}")]
    BadWindow(usize),
    #[error("line image is empty")]
    EmptyLine,
}

/// One `height`x`window` binary window per column of the source line.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FrameSequence {
    pub height: usize,
    pub window: usize,
    pub frames: Vec<BinaryImage>,
}

impl FrameSequence {
    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn frame_dim(&self) -> usize {
        self.height * self.window
    }

    /// All frames flattened row-major into one `len * frame_dim` buffer of
    /// 0.0/1.0 values.
    pub fn features(&self) -> Vec<f64> {
        self.frames
            .iter()
            .flat_map(|f| f.pixels().iter().map(|&b| if b { 1.0 } else { 0.0 }))
            .collect()
    }
}

/// Zero-pads `(window - 1) / 2` columns on each side and emits one window per
/// original column, step 1. Right-to-left lines are mirrored first so that
/// frame 0 is the first column in reading order.
pub fn make_frames(
    line: &BinaryImage,
    window: usize,
    order: ReadingOrder,
) -> Result<FrameSequence, FrameError> {
    if window == 0 || window.is_multiple_of(2) {
        return Err(FrameError::BadWindow(window));
    }
    let (w, h) = (line.width(), line.height());
    if w == 0 || h == 0 {
        return Err(FrameError::EmptyLine);
    }
    let half = (window - 1) / 2;
    let source_col = |c: usize| match order {
        ReadingOrder::Ltr => c,
        ReadingOrder::Rtl => w - 1 - c,
    };
    let frames = (0..w)
        .map(|t| {
            let mut frame = BinaryImage::new(window, h);
            for dx in 0..window {
                let col = t as i64 + dx as i64 - half as i64;
                if col < 0 || col >= w as i64 {
                    continue;
                }
                let src = source_col(col as usize);
                for y in 0..h {
                    if line.get(src, y) {
                        frame.set(dx, y, true);
                    }
                }
            }
            frame
        })
        .collect();
    Ok(FrameSequence {
        height: h,
        window,
        frames,
    })
}

/// Brings a cropped line to the model's frame height: trims to the ink,
/// adds `margin` blank columns on both sides and centers the rows in
/// `height` (taller lines are subsampled by nearest neighbour).
pub fn fit_line_height(line: &BinaryImage, height: usize, margin: usize) -> BinaryImage {
    let Some((x0, y0, x1, y1)) = line.ink_bbox() else {
        return BinaryImage::new(2 * margin + 1, height);
    };
    let (iw, ih) = (x1 - x0 + 1, y1 - y0 + 1);
    let mut out = BinaryImage::new(iw + 2 * margin, height);
    if ih <= height {
        let top = (height - ih) / 2;
        for y in 0..ih {
            for x in 0..iw {
                if line.get(x0 + x, y0 + y) {
                    out.set(margin + x, top + y, true);
                }
            }
        }
    } else {
        for y in 0..height {
            let sy = y0 + (y * ih) / height;
            for x in 0..iw {
                if line.get(x0 + x, sy) {
                    out.set(margin + x, y, true);
                }
            }
        }
    }
    out
}
