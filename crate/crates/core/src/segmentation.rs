//! Blob extraction and text-line grouping.
//!
//! Core blobs (area at least `small_blob_area`) are clustered into lines by
//! their centroid height; each line gets three least-squares lines through
//! the blob tops, centroids and bottoms. Small blobs are then attached to the
//! nearest line as diacritics, or set aside as noise.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::raster::BinaryImage;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub enum Connectivity {
    Four,
    Eight,
}

impl Connectivity {
    pub fn offsets(self) -> &'static [(i64, i64)] {
        const FOUR: [(i64, i64); 4] = [(0, -1), (-1, 0), (1, 0), (0, 1)];
        const EIGHT: [(i64, i64); 8] = [
            (-1, -1),
            (0, -1),
            (1, -1),
            (-1, 0),
            (1, 0),
            (-1, 1),
            (0, 1),
            (1, 1),
        ];
        match self {
            Connectivity::Four => &FOUR,
            Connectivity::Eight => &EIGHT,
        }
    }
}

impl TryFrom<u8> for Connectivity {
    type Error = String;

    fn try_from(v: u8) -> Result<Self, Self::Error> {
        match v {
            4 => Ok(Connectivity::Four),
            8 => Ok(Connectivity::Eight),
            other => Err(format!("connectivity must be 4 or 8, got {other}")),
        }
    }
}

impl From<Connectivity> for u8 {
    fn from(c: Connectivity) -> u8 {
        match c {
            Connectivity::Four => 4,
            Connectivity::Eight => 8,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReadingOrder {
    #[default]
    Ltr,
    Rtl,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ParamError {
    #[error("{field}: {message}")]
    Invalid { field: &'static str, message: String },
}

impl ParamError {
    pub fn field(&self) -> &'static str {
        match self {
            ParamError::Invalid { field, .. } => field,
        }
    }
}

/// Tunable segmentation parameters, shared by the library, the CLI and the
/// tuner UI.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SegParams {
    pub connectivity: Connectivity,
    pub small_blob_area: usize,
    pub line_gap: usize,
    pub reading_order: ReadingOrder,
}

impl Default for SegParams {
    fn default() -> Self {
        Self {
            connectivity: Connectivity::Eight,
            small_blob_area: 12,
            line_gap: 8,
            reading_order: ReadingOrder::Ltr,
        }
    }
}

impl SegParams {
    pub fn validate(&self) -> Result<(), ParamError> {
        if self.small_blob_area < 1 {
            return Err(ParamError::Invalid {
                field: "small_blob_area",
                message: "must be at least 1".into(),
            });
        }
        if self.line_gap < 1 {
            return Err(ParamError::Invalid {
                field: "line_gap",
                message: "must be at least 1".into(),
            });
        }
        Ok(())
    }

    /// Parses a JSON parameter document, reporting the first bad field by
    /// name. Missing fields take their defaults.
    pub fn from_json(value: &serde_json::Value) -> Result<Self, ParamError> {
        let obj = value.as_object().ok_or_else(|| ParamError::Invalid {
            field: "params",
            message: "expected a JSON object".into(),
        })?;
        let mut params = SegParams::default();
        for (key, v) in obj {
            match key.as_str() {
                "connectivity" => {
                    params.connectivity = v
                        .as_u64()
                        .and_then(|n| u8::try_from(n).ok())
                        .and_then(|n| Connectivity::try_from(n).ok())
                        .ok_or_else(|| ParamError::Invalid {
                            field: "connectivity",
                            message: format!("must be 4 or 8, got {v}"),
                        })?;
                }
                "small_blob_area" => params.small_blob_area = positive_int("small_blob_area", v)?,
                "line_gap" => params.line_gap = positive_int("line_gap", v)?,
                "reading_order" => {
                    params.reading_order = match v.as_str() {
                        Some("ltr") => ReadingOrder::Ltr,
                        Some("rtl") => ReadingOrder::Rtl,
                        _ => {
                            return Err(ParamError::Invalid {
                                field: "reading_order",
                                message: format!("must be \"ltr\" or \"rtl\", got {v}"),
                            })
                        }
                    }
                }
                _ => {
                    return Err(ParamError::Invalid {
                        field: "params",
                        message: format!("unknown field `{key}`"),
                    })
                }
            }
        }
        params.validate()?;
        Ok(params)
    }
}

fn positive_int(field: &'static str, v: &serde_json::Value) -> Result<usize, ParamError> {
    match v.as_i64() {
        Some(n) if n >= 1 => Ok(n as usize),
        Some(n) => Err(ParamError::Invalid {
            field,
            message: format!("must be at least 1, got {n}"),
        }),
        None => Err(ParamError::Invalid {
            field,
            message: format!("must be an integer, got {v}"),
        }),
    }
}

/// Inclusive pixel bounding box, serialized as `[x0, y0, x1, y1]`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(from = "[usize; 4]", into = "[usize; 4]")]
pub struct BBox {
    pub x0: usize,
    pub y0: usize,
    pub x1: usize,
    pub y1: usize,
}

impl BBox {
    pub fn width(&self) -> usize {
        self.x1 - self.x0 + 1
    }

    pub fn height(&self) -> usize {
        self.y1 - self.y0 + 1
    }

    pub fn union(&self, other: &BBox) -> BBox {
        BBox {
            x0: self.x0.min(other.x0),
            y0: self.y0.min(other.y0),
            x1: self.x1.max(other.x1),
            y1: self.y1.max(other.y1),
        }
    }
}

impl From<[usize; 4]> for BBox {
    fn from([x0, y0, x1, y1]: [usize; 4]) -> Self {
        BBox { x0, y0, x1, y1 }
    }
}

impl From<BBox> for [usize; 4] {
    fn from(b: BBox) -> Self {
        [b.x0, b.y0, b.x1, b.y1]
    }
}

/// A connected set of ink pixels. `pixels` is kept in raster order and is
/// not part of the JSON form.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Blob {
    pub id: usize,
    #[serde(skip)]
    pub pixels: Vec<(usize, usize)>,
    pub bbox: BBox,
    pub area: usize,
    pub centroid: (f64, f64),
}

impl Blob {
    pub fn from_pixels(id: usize, mut pixels: Vec<(usize, usize)>) -> Blob {
        assert!(!pixels.is_empty(), "blob must have at least one pixel");
        pixels.sort_by_key(|&(x, y)| (y, x));
        let mut bbox = BBox {
            x0: usize::MAX,
            y0: usize::MAX,
            x1: 0,
            y1: 0,
        };
        let (mut sx, mut sy) = (0f64, 0f64);
        for &(x, y) in &pixels {
            bbox.x0 = bbox.x0.min(x);
            bbox.y0 = bbox.y0.min(y);
            bbox.x1 = bbox.x1.max(x);
            bbox.y1 = bbox.y1.max(y);
            sx += x as f64;
            sy += y as f64;
        }
        let n = pixels.len();
        Blob {
            id,
            area: n,
            centroid: (sx / n as f64, sy / n as f64),
            bbox,
            pixels,
        }
    }

    /// The blob alone, in a mask of its bounding box.
    pub fn mask(&self) -> BinaryImage {
        let mut img = BinaryImage::new(self.bbox.width(), self.bbox.height());
        for &(x, y) in &self.pixels {
            img.set(x - self.bbox.x0, y - self.bbox.y0, true);
        }
        img
    }
}

/// `y = slope * x + intercept` in page coordinates (y grows downward).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegressionLine {
    pub slope: f64,
    pub intercept: f64,
}

impl RegressionLine {
    pub fn at(&self, x: f64) -> f64 {
        self.slope * x + self.intercept
    }

    fn fit(points: &[(f64, f64)]) -> RegressionLine {
        let n = points.len() as f64;
        let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
        let my = points.iter().map(|p| p.1).sum::<f64>() / n;
        let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
        let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
        if points.len() < 2 || sxx <= f64::EPSILON {
            return RegressionLine {
                slope: 0.0,
                intercept: my,
            };
        }
        let slope = sxy / sxx;
        RegressionLine {
            slope,
            intercept: my - slope * mx,
        }
    }

    fn fit_with_slope(points: &[(f64, f64)], slope: f64) -> RegressionLine {
        let n = points.len() as f64;
        let intercept = points.iter().map(|p| p.1 - slope * p.0).sum::<f64>() / n;
        RegressionLine { slope, intercept }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TextLine {
    pub blob_ids: Vec<usize>,
    pub top: RegressionLine,
    pub middle: RegressionLine,
    pub bottom: RegressionLine,
    pub x_span: (usize, usize),
}

impl TextLine {
    pub fn height_at(&self, x: f64) -> f64 {
        self.bottom.at(x) - self.top.at(x)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PageSegmentation {
    pub params: SegParams,
    pub blobs: Vec<Blob>,
    pub lines: Vec<TextLine>,
    pub noise_ids: Vec<usize>,
}

/// Connected components of the ink, ids in raster order of each blob's first
/// pixel.
pub fn extract_blobs(img: &BinaryImage, connectivity: Connectivity) -> Vec<Blob> {
    let (w, h) = (img.width(), img.height());
    let mut seen = vec![false; w * h];
    let mut blobs = Vec::new();
    let mut queue = VecDeque::new();
    for start in 0..w * h {
        if seen[start] || !img.pixels()[start] {
            continue;
        }
        seen[start] = true;
        queue.push_back(start);
        let mut pixels = Vec::new();
        while let Some(i) = queue.pop_front() {
            let (x, y) = ((i % w) as i64, (i / w) as i64);
            pixels.push((x as usize, y as usize));
            for &(dx, dy) in connectivity.offsets() {
                let (nx, ny) = (x + dx, y + dy);
                if img.get_signed(nx, ny) {
                    let j = ny as usize * w + nx as usize;
                    if !seen[j] {
                        seen[j] = true;
                        queue.push_back(j);
                    }
                }
            }
        }
        blobs.push(Blob::from_pixels(blobs.len(), pixels));
    }
    blobs
}

fn fit_line(members: &[&Blob]) -> (RegressionLine, RegressionLine, RegressionLine) {
    let tops: Vec<_> = members
        .iter()
        .map(|b| (b.centroid.0, b.bbox.y0 as f64))
        .collect();
    let mids: Vec<_> = members.iter().map(|b| b.centroid).collect();
    let bottoms: Vec<_> = members
        .iter()
        .map(|b| (b.centroid.0, b.bbox.y1 as f64))
        .collect();
    let (top, middle, bottom) = (
        RegressionLine::fit(&tops),
        RegressionLine::fit(&mids),
        RegressionLine::fit(&bottoms),
    );
    let x0 = members.iter().map(|b| b.bbox.x0).min().unwrap_or(0) as f64;
    let x1 = members.iter().map(|b| b.bbox.x1).max().unwrap_or(0) as f64;
    let ordered = |x: f64| top.at(x) <= middle.at(x) && middle.at(x) <= bottom.at(x);
    if ordered(x0) && ordered(x1) {
        return (top, middle, bottom);
    }
    // Independent fits can cross near the ends of a short, uneven line.
    // Sharing the centroid slope keeps the three lines parallel, and the
    // per-blob ordering top <= centroid <= bottom then carries over.
    let slope = middle.slope;
    (
        RegressionLine::fit_with_slope(&tops, slope),
        RegressionLine::fit_with_slope(&mids, slope),
        RegressionLine::fit_with_slope(&bottoms, slope),
    )
}

fn order_in_line(ids: &mut [usize], blobs: &[Blob], order: ReadingOrder) {
    ids.sort_by(|&a, &b| {
        let (ca, cb) = (blobs[a].centroid.0, blobs[b].centroid.0);
        let key = ca.total_cmp(&cb).then(a.cmp(&b));
        match order {
            ReadingOrder::Ltr => key,
            ReadingOrder::Rtl => key.reverse(),
        }
    });
}

/// Groups core blobs into text lines by single-link clustering of their
/// centroid heights.
pub fn detect_lines(blobs: &[Blob], params: &SegParams) -> Vec<TextLine> {
    let mut core: Vec<&Blob> = blobs
        .iter()
        .filter(|b| b.area >= params.small_blob_area)
        .collect();
    if core.is_empty() {
        return Vec::new();
    }
    core.sort_by(|a, b| a.centroid.1.total_cmp(&b.centroid.1).then(a.id.cmp(&b.id)));

    let mut groups: Vec<Vec<&Blob>> = vec![vec![core[0]]];
    for pair in core.windows(2) {
        if pair[1].centroid.1 - pair[0].centroid.1 <= params.line_gap as f64 {
            groups.last_mut().unwrap().push(pair[1]);
        } else {
            groups.push(vec![pair[1]]);
        }
    }

    groups
        .into_iter()
        .map(|members| {
            let (top, middle, bottom) = fit_line(&members);
            let mut blob_ids: Vec<usize> = members.iter().map(|b| b.id).collect();
            order_in_line(&mut blob_ids, blobs, params.reading_order);
            TextLine {
                blob_ids,
                top,
                middle,
                bottom,
                x_span: (
                    members.iter().map(|b| b.bbox.x0).min().unwrap(),
                    members.iter().map(|b| b.bbox.x1).max().unwrap(),
                ),
            }
        })
        .collect()
}

/// Assigns every small blob to the nearest line whose middle is within twice
/// the line height, or to noise. Ties go to the lower line.
pub fn attach_diacritics(
    mut lines: Vec<TextLine>,
    blobs: &[Blob],
    params: &SegParams,
) -> PageSegmentation {
    let mut noise_ids = Vec::new();
    for blob in blobs.iter().filter(|b| b.area < params.small_blob_area) {
        let (cx, cy) = blob.centroid;
        let mut best: Option<(usize, f64)> = None;
        for (i, line) in lines.iter().enumerate() {
            let dist = (cy - line.middle.at(cx)).abs();
            let window = 2.0 * line.height_at(cx);
            if dist > window {
                continue;
            }
            let lower = |j: usize| lines[j].middle.at(cx);
            let better = match best {
                None => true,
                Some((j, d)) => dist < d || (dist == d && line.middle.at(cx) > lower(j)),
            };
            if better {
                best = Some((i, dist));
            }
        }
        match best {
            Some((i, _)) => lines[i].blob_ids.push(blob.id),
            None => noise_ids.push(blob.id),
        }
    }
    PageSegmentation {
        params: params.clone(),
        blobs: blobs.to_vec(),
        lines,
        noise_ids,
    }
}

/// Full page pass: blobs, lines, diacritics.
pub fn segment_page(img: &BinaryImage, params: &SegParams) -> PageSegmentation {
    let blobs = extract_blobs(img, params.connectivity);
    let lines = detect_lines(&blobs, params);
    attach_diacritics(lines, &blobs, params)
}

/// Union bounding box of a line's blobs.
pub fn line_bbox(line: &TextLine, blobs: &[Blob]) -> BBox {
    line.blob_ids
        .iter()
        .map(|&id| blobs[id].bbox)
        .reduce(|a, b| a.union(&b))
        .expect("text line has at least one blob")
}

/// Crops a line: the union bbox of its blobs grown by `margin` and clamped
/// to the page. Only the line's own blobs are copied in. Also returns the
/// crop origin in page coordinates.
pub fn crop_line_at(
    img: &BinaryImage,
    line: &TextLine,
    blobs: &[Blob],
    margin: usize,
) -> (BinaryImage, (usize, usize)) {
    let bbox = line_bbox(line, blobs);
    let x0 = bbox.x0.saturating_sub(margin);
    let y0 = bbox.y0.saturating_sub(margin);
    let x1 = (bbox.x1 + margin).min(img.width() - 1);
    let y1 = (bbox.y1 + margin).min(img.height() - 1);
    let mut out = BinaryImage::new(x1 - x0 + 1, y1 - y0 + 1);
    for &id in &line.blob_ids {
        for &(x, y) in &blobs[id].pixels {
            out.set(x - x0, y - y0, true);
        }
    }
    (out, (x0, y0))
}

pub fn crop_line(img: &BinaryImage, line: &TextLine, blobs: &[Blob], margin: usize) -> BinaryImage {
    crop_line_at(img, line, blobs, margin).0
}
