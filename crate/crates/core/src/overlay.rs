//! RGB rendering of a page segmentation for inspection.

use image::{Rgb, RgbImage};

use crate::raster::BinaryImage;
use crate::segmentation::{BBox, PageSegmentation, RegressionLine};

pub const BACKGROUND: [u8; 3] = [24, 24, 24];
pub const INK: [u8; 3] = [255, 255, 255];
pub const NOISE: [u8; 3] = [96, 96, 96];
pub const BOX: [u8; 3] = [230, 160, 0];
pub const TOP: [u8; 3] = [0, 0, 255];
pub const MIDDLE: [u8; 3] = [255, 0, 0];
pub const BOTTOM: [u8; 3] = [0, 255, 0];

fn put(img: &mut RgbImage, x: i64, y: i64, c: [u8; 3]) {
    if x >= 0 && y >= 0 && (x as u32) < img.width() && (y as u32) < img.height() {
        img.put_pixel(x as u32, y as u32, Rgb(c));
    }
}

fn draw_box(img: &mut RgbImage, b: &BBox, c: [u8; 3]) {
    let (x0, y0, x1, y1) = (b.x0 as i64 - 1, b.y0 as i64 - 1, b.x1 as i64 + 1, b.y1 as i64 + 1);
    for x in x0..=x1 {
        put(img, x, y0, c);
        put(img, x, y1, c);
    }
    for y in y0..=y1 {
        put(img, x0, y, c);
        put(img, x1, y, c);
    }
}

fn draw_regression(img: &mut RgbImage, line: &RegressionLine, span: (usize, usize), c: [u8; 3]) {
    for x in span.0..=span.1 {
        put(img, x as i64, line.at(x as f64).round() as i64, c);
    }
}

/// Ink in white, noise blobs dimmed, every line blob boxed, and each text
/// line's top, middle and bottom regression lines in blue, red and green.
pub fn render_overlay(page: &BinaryImage, seg: &PageSegmentation) -> RgbImage {
    let mut img = RgbImage::from_pixel(page.width() as u32, page.height() as u32, Rgb(BACKGROUND));
    for (x, y) in page.foreground_pixels() {
        img.put_pixel(x as u32, y as u32, Rgb(INK));
    }
    for &id in &seg.noise_ids {
        for &(x, y) in &seg.blobs[id].pixels {
            img.put_pixel(x as u32, y as u32, Rgb(NOISE));
        }
    }
    for line in &seg.lines {
        for &id in &line.blob_ids {
            draw_box(&mut img, &seg.blobs[id].bbox, BOX);
        }
    }
    for line in &seg.lines {
        draw_regression(&mut img, &line.top, line.x_span, TOP);
        draw_regression(&mut img, &line.bottom, line.x_span, BOTTOM);
        draw_regression(&mut img, &line.middle, line.x_span, MIDDLE);
    }
    img
}

pub fn encode_rgb_png(img: &RgbImage) -> Vec<u8> {
    let mut out = std::io::Cursor::new(Vec::new());
    img.write_to(&mut out, image::ImageFormat::Png)
        .expect("in-memory PNG encoding");
    out.into_inner()
}

pub fn overlay_png(page: &BinaryImage, seg: &PageSegmentation) -> Vec<u8> {
    encode_rgb_png(&render_overlay(page, seg))
}
