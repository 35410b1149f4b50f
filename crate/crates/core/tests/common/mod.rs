#![allow(dead_code)]

use std::collections::VecDeque;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use scriptorium_core::raster::BinaryImage;
use scriptorium_core::segmentation::{extract_blobs, Blob, Connectivity};

/// Largest 8-connected blob of a random binary image; ties go to the lower id.
pub fn random_blob(seed: u64) -> (Blob, usize, usize) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (w, h) = (rng.gen_range(1..=18), rng.gen_range(1..=18));
    let density = rng.gen_range(0.3..0.85);
    let mut img = BinaryImage::new(w, h);
    for y in 0..h {
        for x in 0..w {
            img.set(x, y, rng.gen::<f64>() < density);
        }
    }
    if img.is_blank() {
        img.set(w / 2, h / 2, true);
    }
    let blob = extract_blobs(&img, Connectivity::Eight)
        .into_iter()
        .max_by_key(|b| (b.area, std::cmp::Reverse(b.id)))
        .unwrap();
    (blob, w, h)
}

pub fn blob_mask(blob: &Blob, w: usize, h: usize) -> BinaryImage {
    let mut img = BinaryImage::new(w, h);
    for &(x, y) in &blob.pixels {
        img.set(x, y, true);
    }
    img
}

fn flood(grid: &[bool], w: usize, h: usize, eight: bool) -> Vec<Vec<usize>> {
    let mut seen = vec![false; w * h];
    let mut comps = Vec::new();
    for s in 0..w * h {
        if !grid[s] || seen[s] {
            continue;
        }
        seen[s] = true;
        let mut comp = vec![];
        let mut q = VecDeque::from([s]);
        while let Some(i) = q.pop_front() {
            comp.push(i);
            let (x, y) = ((i % w) as i64, (i / w) as i64);
            for dy in -1..=1i64 {
                for dx in -1..=1i64 {
                    if (dx == 0 && dy == 0) || (!eight && dx != 0 && dy != 0) {
                        continue;
                    }
                    let (nx, ny) = (x + dx, y + dy);
                    if nx < 0 || ny < 0 || nx >= w as i64 || ny >= h as i64 {
                        continue;
                    }
                    let j = ny as usize * w + nx as usize;
                    if grid[j] && !seen[j] {
                        seen[j] = true;
                        q.push_back(j);
                    }
                }
            }
        }
        comps.push(comp);
    }
    comps
}

/// 8-connected ink components.
pub fn component_count(img: &BinaryImage) -> usize {
    flood(img.pixels(), img.width(), img.height(), true).len()
}

/// 4-connected background components that do not reach the border of the
/// image padded by one pixel.
pub fn hole_count(img: &BinaryImage) -> usize {
    let (w, h) = (img.width() + 2, img.height() + 2);
    let mut bg = vec![true; w * h];
    for (x, y) in img.foreground_pixels() {
        bg[(y + 1) * w + x + 1] = false;
    }
    flood(&bg, w, h, false)
        .iter()
        .filter(|c| !c.iter().any(|&i| i % w == 0 || i / w == 0 || i % w == w - 1 || i / w == h - 1))
        .count()
}

/// Character-like blob: the largest component of a few thick strokes,
/// discs and rings drawn on a small canvas.
pub fn random_stroke_blob(seed: u64) -> (Blob, usize, usize) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (w, h) = (rng.gen_range(12..=40), rng.gen_range(12..=40));
    let mut img = BinaryImage::new(w, h);
    let shapes = rng.gen_range(1..=5);
    for _ in 0..shapes {
        let (cx, cy) = (rng.gen_range(0.0..w as f64), rng.gen_range(0.0..h as f64));
        match rng.gen_range(0..3) {
            0 => {
                let (ex, ey) = (rng.gen_range(0.0..w as f64), rng.gen_range(0.0..h as f64));
                let r = rng.gen_range(0.8..3.0);
                paint(&mut img, |x, y| segment_distance((x, y), (cx, cy), (ex, ey)) <= r);
            }
            1 => {
                let r = rng.gen_range(1.0..6.0);
                paint(&mut img, |x, y| ((x - cx).powi(2) + (y - cy).powi(2)).sqrt() <= r);
            }
            _ => {
                let outer = rng.gen_range(3.0..10.0);
                let inner = outer - rng.gen_range(1.2..3.5);
                paint(&mut img, |x, y| {
                    let d = ((x - cx).powi(2) + (y - cy).powi(2)).sqrt();
                    d <= outer && d > inner
                });
            }
        }
    }
    if img.is_blank() {
        img.set(w / 2, h / 2, true);
    }
    let blob = extract_blobs(&img, Connectivity::Eight)
        .into_iter()
        .max_by_key(|b| (b.area, std::cmp::Reverse(b.id)))
        .unwrap();
    (blob, w, h)
}

fn paint(img: &mut BinaryImage, inside: impl Fn(f64, f64) -> bool) {
    for y in 0..img.height() {
        for x in 0..img.width() {
            if inside(x as f64 + 0.5, y as f64 + 0.5) {
                img.set(x, y, true);
            }
        }
    }
}

fn segment_distance(p: (f64, f64), a: (f64, f64), b: (f64, f64)) -> f64 {
    let (dx, dy) = (b.0 - a.0, b.1 - a.1);
    let len2 = dx * dx + dy * dy;
    let t = if len2 == 0.0 { 0.0 } else { (((p.0 - a.0) * dx + (p.1 - a.1) * dy) / len2).clamp(0.0, 1.0) };
    ((p.0 - a.0 - t * dx).powi(2) + (p.1 - a.1 - t * dy).powi(2)).sqrt()
}
