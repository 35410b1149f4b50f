//! Oriented boundary cycles of blobs.
//!
//! Vertices sit on pixel corners: pixel `(x, y)` covers the unit square with
//! corners `(x, y)` and `(x + 1, y + 1)`, y growing downward. Every cycle is
//! walked with the ink on its left, so outer boundaries run counterclockwise
//! on screen and have positive signed area, while hole boundaries have
//! negative area. Ink is 8-connected and background 4-connected: where two ink
//! pixels touch only at a corner the walk turns right and keeps them on one
//! cycle.
//!
//! Two tracers produce the same cycles. [`trace_graph`] collects the directed
//! boundary edges and follows them; [`trace_sweep`] visits the pixel corners
//! once in raster order and stitches edge fragments into loops as they close.

use std::collections::{BTreeMap, VecDeque};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::raster::BinaryImage;
use crate::segmentation::{Blob, PageSegmentation};

pub type Vertex = (i64, i64);

#[derive(Debug, Error, PartialEq, Eq)]
pub enum OutlineError {
    #[error("vertex ({x}, {y}) lies outside a {width}x{height} canvas")]
    OutOfBounds {
        x: i64,
        y: i64,
        width: usize,
        height: usize,
    },
    #[error("page has no blobs to encode")]
    EmptyPage,
    #[error("malformed chain code: {0}")]
    Malformed(String),
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct OutlineCycle {
    pub vertices: Vec<Vertex>,
    /// +1 for an outer boundary, -1 for a hole.
    pub orientation: i8,
    pub signed_area: i64,
}

impl OutlineCycle {
    /// Builds a cycle from a closed vertex walk (the closing edge back to the
    /// first vertex is implicit).
    pub fn from_vertices(vertices: Vec<Vertex>) -> OutlineCycle {
        let signed_area = signed_area(&vertices);
        OutlineCycle {
            orientation: if signed_area > 0 { 1 } else { -1 },
            vertices,
            signed_area,
        }
    }

    pub fn len(&self) -> usize {
        self.vertices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }

    pub fn edges(&self) -> impl Iterator<Item = (Vertex, Vertex)> + '_ {
        let n = self.vertices.len();
        (0..n).map(move |i| (self.vertices[i], self.vertices[(i + 1) % n]))
    }

    /// Same walk, started at the lexicographically smallest vertex.
    pub fn canonical(&self) -> OutlineCycle {
        let start = self
            .vertices
            .iter()
            .enumerate()
            .min_by_key(|(_, v)| **v)
            .map_or(0, |(i, _)| i);
        let mut vertices = self.vertices.clone();
        vertices.rotate_left(start);
        OutlineCycle {
            vertices,
            ..*self
        }
    }
}

/// Shoelace area in y-down coordinates: positive for counterclockwise on
/// screen.
pub fn signed_area(vertices: &[Vertex]) -> i64 {
    let n = vertices.len();
    let twice: i64 = (0..n)
        .map(|i| {
            let (x0, y0) = vertices[i];
            let (x1, y1) = vertices[(i + 1) % n];
            x1 * y0 - x0 * y1
        })
        .sum();
    twice / 2
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BlobOutline {
    pub blob_id: usize,
    pub cycles: Vec<OutlineCycle>,
}

impl BlobOutline {
    /// Cycles rotated to their smallest vertex and sorted by it; two
    /// outlines describe the same boundary iff their canonical forms match.
    pub fn canonical(&self) -> BlobOutline {
        let mut cycles: Vec<_> = self.cycles.iter().map(OutlineCycle::canonical).collect();
        cycles.sort_by(|a, b| a.vertices.cmp(&b.vertices));
        BlobOutline {
            blob_id: self.blob_id,
            cycles,
        }
    }

    pub fn outer(&self) -> &OutlineCycle {
        self.cycles
            .iter()
            .find(|c| c.orientation > 0)
            .expect("every outline has an outer cycle")
    }

    pub fn holes(&self) -> impl Iterator<Item = &OutlineCycle> {
        self.cycles.iter().filter(|c| c.orientation < 0)
    }

    pub fn total_area(&self) -> i64 {
        self.cycles.iter().map(|c| c.signed_area).sum()
    }
}

/// Ink lookup for one blob, padded so corner queries never leave the grid.
struct BlobMask {
    x0: i64,
    y0: i64,
    w: i64,
    h: i64,
    bits: Vec<bool>,
}

impl BlobMask {
    fn new(blob: &Blob) -> BlobMask {
        let x0 = blob.bbox.x0 as i64 - 1;
        let y0 = blob.bbox.y0 as i64 - 1;
        let w = blob.bbox.width() as i64 + 2;
        let h = blob.bbox.height() as i64 + 2;
        let mut bits = vec![false; (w * h) as usize];
        for &(x, y) in &blob.pixels {
            bits[((y as i64 - y0) * w + (x as i64 - x0)) as usize] = true;
        }
        BlobMask { x0, y0, w, h, bits }
    }

    fn ink(&self, x: i64, y: i64) -> bool {
        let (lx, ly) = (x - self.x0, y - self.y0);
        lx >= 0 && ly >= 0 && lx < self.w && ly < self.h && self.bits[(ly * self.w + lx) as usize]
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
enum Dir {
    E,
    S,
    W,
    N,
}

impl Dir {
    fn step(self) -> (i64, i64) {
        match self {
            Dir::E => (1, 0),
            Dir::S => (0, 1),
            Dir::W => (-1, 0),
            Dir::N => (0, -1),
        }
    }

    /// Clockwise on screen.
    fn right(self) -> Dir {
        match self {
            Dir::E => Dir::S,
            Dir::S => Dir::W,
            Dir::W => Dir::N,
            Dir::N => Dir::E,
        }
    }

    fn left(self) -> Dir {
        self.right().right().right()
    }

    fn code(self) -> u8 {
        self as u8
    }

    fn from_code(c: u8) -> Dir {
        [Dir::E, Dir::S, Dir::W, Dir::N][(c & 3) as usize]
    }

    fn between(a: Vertex, b: Vertex) -> Option<Dir> {
        match (b.0 - a.0, b.1 - a.1) {
            (1, 0) => Some(Dir::E),
            (0, 1) => Some(Dir::S),
            (-1, 0) => Some(Dir::W),
            (0, -1) => Some(Dir::N),
            _ => None,
        }
    }
}

/// Ink on the left of the unit edge leaving `v` in direction `d`.
fn ink_on_left(mask: &BlobMask, v: Vertex, d: Dir) -> bool {
    let (x, y) = v;
    match d {
        Dir::E => mask.ink(x, y - 1),
        Dir::S => mask.ink(x, y),
        Dir::W => mask.ink(x - 1, y),
        Dir::N => mask.ink(x - 1, y - 1),
    }
}

/// Boundary tracing by edge graph: collect every directed boundary edge
/// (ink on the left), then follow successors, turning right wherever two
/// continuations exist.
pub fn trace_graph(blob: &Blob) -> BlobOutline {
    let mask = BlobMask::new(blob);
    // outgoing boundary directions per vertex; at most two (at a saddle)
    let mut out: BTreeMap<Vertex, Vec<Dir>> = BTreeMap::new();
    for &(px, py) in &blob.pixels {
        let (x, y) = (px as i64, py as i64);
        if !mask.ink(x, y - 1) {
            out.entry((x + 1, y)).or_default().push(Dir::W);
        }
        if !mask.ink(x - 1, y) {
            out.entry((x, y)).or_default().push(Dir::S);
        }
        if !mask.ink(x, y + 1) {
            out.entry((x, y + 1)).or_default().push(Dir::E);
        }
        if !mask.ink(x + 1, y) {
            out.entry((x + 1, y + 1)).or_default().push(Dir::N);
        }
    }

    let mut used: BTreeMap<(Vertex, Dir), bool> = out
        .iter()
        .flat_map(|(&v, ds)| ds.iter().map(move |&d| ((v, d), false)))
        .collect();
    let starts: Vec<(Vertex, Dir)> = used.keys().copied().collect();

    let mut cycles = Vec::new();
    for start in starts {
        if used[&start] {
            continue;
        }
        let mut vertices = Vec::new();
        let (mut v, mut d) = start;
        loop {
            *used.get_mut(&(v, d)).expect("edge in graph") = true;
            vertices.push(v);
            let (dx, dy) = d.step();
            v = (v.0 + dx, v.1 + dy);
            let choices = &out[&v];
            d = if choices.len() == 1 {
                choices[0]
            } else if choices.contains(&d.right()) {
                d.right()
            } else {
                debug_assert!(choices.contains(&d.left()));
                d.left()
            };
            if (v, d) == start {
                break;
            }
        }
        cycles.push(OutlineCycle::from_vertices(vertices));
    }
    BlobOutline {
        blob_id: blob.id,
        cycles,
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum End {
    Front,
    Back,
}

/// Where an open chain end waits for its next vertex: on the horizontal
/// edge arriving at column `x` of the current row, or on the vertical edge
/// arriving at column `x` of the next row.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Slot {
    Horizontal(usize),
    Vertical(usize),
}

struct Chain {
    verts: VecDeque<Vertex>,
    slots: [Slot; 2],
}

struct Sweep {
    chains: Vec<Option<Chain>>,
    horizontal: Vec<Option<(usize, End)>>,
    vertical: Vec<Option<(usize, End)>>,
    closed: Vec<Vec<Vertex>>,
}

fn end_index(e: End) -> usize {
    match e {
        End::Front => 0,
        End::Back => 1,
    }
}

impl Sweep {
    fn slot_mut(&mut self, slot: Slot) -> &mut Option<(usize, End)> {
        match slot {
            Slot::Horizontal(x) => &mut self.horizontal[x],
            Slot::Vertical(x) => &mut self.vertical[x],
        }
    }

    fn take(&mut self, slot: Slot) -> (usize, End) {
        self.slot_mut(slot).take().expect("open chain end at slot")
    }

    fn park(&mut self, chain: usize, end: End, slot: Slot) {
        *self.slot_mut(slot) = Some((chain, end));
        self.chains[chain].as_mut().unwrap().slots[end_index(end)] = slot;
    }

    fn open(&mut self, v: Vertex, a: Slot, b: Slot) {
        let id = self.chains.len();
        self.chains.push(Some(Chain {
            verts: VecDeque::from([v]),
            slots: [a, b],
        }));
        self.park(id, End::Front, a);
        self.park(id, End::Back, b);
    }

    fn extend(&mut self, v: Vertex, from: Slot, to: Slot) {
        let (id, end) = self.take(from);
        let chain = self.chains[id].as_mut().unwrap();
        match end {
            End::Front => chain.verts.push_front(v),
            End::Back => chain.verts.push_back(v),
        }
        self.park(id, end, to);
    }

    fn join(&mut self, v: Vertex, a: Slot, b: Slot) {
        let (ia, ea) = self.take(a);
        let (ib, eb) = self.take(b);
        if ia == ib {
            let mut chain = self.chains[ia].take().unwrap();
            chain.verts.push_front(v);
            self.closed.push(chain.verts.into());
            return;
        }
        let mut ca = self.chains[ia].take().unwrap();
        let mut cb = self.chains[ib].take().unwrap();
        // orient so that A ends and B starts at v
        if ea == End::Front {
            ca.verts.make_contiguous().reverse();
            ca.slots.swap(0, 1);
        }
        if eb == End::Back {
            cb.verts.make_contiguous().reverse();
            cb.slots.swap(0, 1);
        }
        let front_slot = ca.slots[0];
        let back_slot = cb.slots[1];
        ca.verts.push_back(v);
        ca.verts.extend(cb.verts);
        let id = self.chains.len();
        self.chains.push(Some(Chain {
            verts: ca.verts,
            slots: [front_slot, back_slot],
        }));
        self.park(id, End::Front, front_slot);
        self.park(id, End::Back, back_slot);
    }
}

/// Boundary tracing by a single raster sweep over pixel corners. Each corner
/// looks at its four surrounding pixels, decides which of its up/left/right/
/// down edges lie on the boundary and how they pair up, and extends, opens,
/// merges or closes chains accordingly.
pub fn trace_sweep(blob: &Blob) -> BlobOutline {
    let mask = BlobMask::new(blob);
    let (bx0, by0) = (blob.bbox.x0 as i64, blob.bbox.y0 as i64);
    let (bx1, by1) = (blob.bbox.x1 as i64 + 1, blob.bbox.y1 as i64 + 1);
    let cols = (bx1 - bx0 + 2) as usize;
    let mut sweep = Sweep {
        chains: Vec::new(),
        horizontal: vec![None; cols],
        vertical: vec![None; cols],
        closed: Vec::new(),
    };
    for y in by0..=by1 {
        for x in bx0..=bx1 {
            let col = (x - bx0) as usize;
            let a = mask.ink(x - 1, y - 1);
            let b = mask.ink(x, y - 1);
            let c = mask.ink(x - 1, y);
            let d = mask.ink(x, y);
            let (up, left, right, down) = (a != b, a != c, b != d, c != d);
            let v = (x, y);
            let s_up = Slot::Vertical(col);
            let s_left = Slot::Horizontal(col);
            let s_right = Slot::Horizontal(col + 1);
            let s_down = Slot::Vertical(col);
            match (up, left, right, down) {
                (false, false, false, false) => {}
                (true, true, true, true) => {
                    if a && d {
                        // b and c are separate background; each gets its corner
                        sweep.extend(v, s_up, s_right);
                        sweep.extend(v, s_left, s_down);
                    } else {
                        sweep.join(v, s_up, s_left);
                        sweep.open(v, s_right, s_down);
                    }
                }
                (true, true, false, false) => sweep.join(v, s_up, s_left),
                (true, false, true, false) => sweep.extend(v, s_up, s_right),
                (true, false, false, true) => sweep.extend(v, s_up, s_down),
                (false, true, true, false) => sweep.extend(v, s_left, s_right),
                (false, true, false, true) => sweep.extend(v, s_left, s_down),
                (false, false, true, true) => sweep.open(v, s_right, s_down),
                other => unreachable!("corner with odd edge count {other:?}"),
            }
        }
    }
    debug_assert!(sweep.chains.iter().all(Option::is_none));

    let cycles = sweep
        .closed
        .into_iter()
        .map(|mut verts| {
            let d = Dir::between(verts[0], verts[1]).expect("unit step");
            if !ink_on_left(&mask, verts[0], d) {
                verts.reverse();
            }
            OutlineCycle::from_vertices(verts)
        })
        .collect();
    BlobOutline {
        blob_id: blob.id,
        cycles,
    }
}

/// Even-odd fill of the outline's cycles on a `width`x`height` canvas.
pub fn rasterize(
    outline: &BlobOutline,
    width: usize,
    height: usize,
) -> Result<BinaryImage, OutlineError> {
    let mut parity = vec![false; (width + 1) * height];
    for cycle in &outline.cycles {
        for &(x, y) in &cycle.vertices {
            if x < 0 || y < 0 || x > width as i64 || y > height as i64 {
                return Err(OutlineError::OutOfBounds {
                    x,
                    y,
                    width,
                    height,
                });
            }
        }
        for (p, q) in cycle.edges() {
            if p.0 == q.0 && p.1 != q.1 {
                let row = p.1.min(q.1) as usize;
                let i = row * (width + 1) + p.0 as usize;
                parity[i] = !parity[i];
            }
        }
    }
    let mut img = BinaryImage::new(width, height);
    for y in 0..height {
        let mut inside = false;
        for x in 0..width {
            inside ^= parity[y * (width + 1) + x];
            img.set(x, y, inside);
        }
    }
    Ok(img)
}

pub fn trace_page(page: &PageSegmentation) -> Vec<BlobOutline> {
    use rayon::prelude::*;
    page.blobs.par_iter().map(trace_sweep).collect()
}

fn put_varint(out: &mut Vec<u8>, mut v: u64) {
    loop {
        let byte = (v & 0x7f) as u8;
        v >>= 7;
        if v == 0 {
            out.push(byte);
            return;
        }
        out.push(byte | 0x80);
    }
}

fn get_varint(bytes: &[u8], pos: &mut usize) -> Result<u64, OutlineError> {
    let mut v = 0u64;
    for shift in (0..64).step_by(7) {
        let byte = *bytes
            .get(*pos)
            .ok_or_else(|| OutlineError::Malformed("truncated varint".into()))?;
        *pos += 1;
        v |= ((byte & 0x7f) as u64) << shift;
        if byte & 0x80 == 0 {
            return Ok(v);
        }
    }
    Err(OutlineError::Malformed("varint too long".into()))
}

pub const CHAIN_CODE_MAGIC: &[u8; 4] = b"SCC1";

/// Serializes cycles in the chain-code format described in
/// `docs/chain-code.md`: magic, canvas size, cycle count, then per cycle the
/// start vertex, the step count and the packed 2-bit directions.
pub fn encode_chain_code(outlines: &[BlobOutline], width: usize, height: usize) -> Vec<u8> {
    let cycles: Vec<&OutlineCycle> = outlines.iter().flat_map(|o| &o.cycles).collect();
    let mut out = CHAIN_CODE_MAGIC.to_vec();
    put_varint(&mut out, width as u64);
    put_varint(&mut out, height as u64);
    put_varint(&mut out, cycles.len() as u64);
    for cycle in cycles {
        let (x, y) = cycle.vertices[0];
        put_varint(&mut out, x as u64);
        put_varint(&mut out, y as u64);
        put_varint(&mut out, cycle.len() as u64);
        let mut packed = vec![0u8; cycle.len().div_ceil(4)];
        for (i, (p, q)) in cycle.edges().enumerate() {
            let d = Dir::between(p, q).expect("outline edges are unit steps");
            packed[i / 4] |= d.code() << (2 * (i % 4));
        }
        out.extend(packed);
    }
    out
}

/// Inverse of [`encode_chain_code`]; returns the canvas size and the cycles.
pub fn decode_chain_code(bytes: &[u8]) -> Result<(usize, usize, Vec<OutlineCycle>), OutlineError> {
    if !bytes.starts_with(CHAIN_CODE_MAGIC) {
        return Err(OutlineError::Malformed("bad magic".into()));
    }
    let mut pos = 4;
    let width = get_varint(bytes, &mut pos)? as usize;
    let height = get_varint(bytes, &mut pos)? as usize;
    let count = get_varint(bytes, &mut pos)?;
    let mut cycles = Vec::new();
    for _ in 0..count {
        let x = get_varint(bytes, &mut pos)? as i64;
        let y = get_varint(bytes, &mut pos)? as i64;
        let steps = get_varint(bytes, &mut pos)? as usize;
        let packed = bytes
            .get(pos..pos + steps.div_ceil(4))
            .ok_or_else(|| OutlineError::Malformed("truncated direction codes".into()))?;
        pos += packed.len();
        let mut vertices = Vec::with_capacity(steps);
        let mut v = (x, y);
        for i in 0..steps {
            vertices.push(v);
            let (dx, dy) = Dir::from_code(packed[i / 4] >> (2 * (i % 4))).step();
            v = (v.0 + dx, v.1 + dy);
        }
        if v != (x, y) {
            return Err(OutlineError::Malformed("cycle does not close".into()));
        }
        cycles.push(OutlineCycle::from_vertices(vertices));
    }
    if pos != bytes.len() {
        return Err(OutlineError::Malformed("trailing bytes".into()));
    }
    Ok((width, height, cycles))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CompressionReport {
    /// Page bitmap at one bit per pixel, rounded up to whole bytes.
    pub bitmap_bytes: usize,
    pub chain_code_bytes: usize,
    pub ratio: f64,
}

pub fn compression_ratio(
    outlines: &[BlobOutline],
    width: usize,
    height: usize,
) -> Result<CompressionReport, OutlineError> {
    if outlines.is_empty() {
        return Err(OutlineError::EmptyPage);
    }
    let bitmap_bytes = (width * height).div_ceil(8);
    let chain_code_bytes = encode_chain_code(outlines, width, height).len();
    Ok(CompressionReport {
        bitmap_bytes,
        chain_code_bytes,
        ratio: bitmap_bytes as f64 / chain_code_bytes as f64,
    })
}

pub fn page_compression_ratio(
    page: &PageSegmentation,
    width: usize,
    height: usize,
) -> Result<CompressionReport, OutlineError> {
    compression_ratio(&trace_page(page), width, height)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::segmentation::{extract_blobs, Connectivity};

    fn blob_of(rows: &[&str]) -> Blob {
        let img = BinaryImage::from_ascii(rows);
        let mut blobs = extract_blobs(&img, Connectivity::Eight);
        assert_eq!(blobs.len(), 1, "fixture must be one 8-connected blob");
        blobs.pop().unwrap()
    }

    fn both(blob: &Blob) -> BlobOutline {
        let g = trace_graph(blob);
        let s = trace_sweep(blob);
        assert_eq!(g.canonical(), s.canonical());
        g
    }

    #[test]
    fn single_pixel() {
        let o = both(&blob_of(&["#"]));
        assert_eq!(o.cycles.len(), 1);
        let c = &o.cycles[0];
        assert_eq!(c.len(), 4);
        assert_eq!(c.signed_area, 1);
        assert_eq!(c.orientation, 1);
        assert_eq!(c.canonical().vertices, vec![(0, 0), (0, 1), (1, 1), (1, 0)]);
    }

    #[test]
    fn solid_rectangle_perimeter() {
        for (w, h) in [(1, 5), (3, 2), (7, 4)] {
            let rows: Vec<String> = (0..h).map(|_| "#".repeat(w)).collect();
            let refs: Vec<&str> = rows.iter().map(String::as_str).collect();
            let o = both(&blob_of(&refs));
            assert_eq!(o.cycles.len(), 1);
            assert_eq!(o.cycles[0].len(), 2 * (w + h));
            assert_eq!(o.cycles[0].signed_area, (w * h) as i64);
        }
    }

    #[test]
    fn square_with_hole() {
        let o = both(&blob_of(&["###", "#.#", "###"]));
        let mut areas: Vec<i64> = o.cycles.iter().map(|c| c.signed_area).collect();
        areas.sort();
        assert_eq!(areas, vec![-1, 9]);
        assert_eq!(o.total_area(), 8);
        assert_eq!(o.holes().count(), 1);
    }

    #[test]
    fn thin_ring_orientations() {
        let o = both(&blob_of(&["#####", "#...#", "#...#", "#####"]));
        let mut orients: Vec<i8> = o.cycles.iter().map(|c| c.orientation).collect();
        orients.sort();
        assert_eq!(orients, vec![-1, 1]);
        assert_eq!(o.total_area(), 14);
    }

    #[test]
    fn diagonal_touch_stays_one_cycle() {
        let o = both(&blob_of(&["#.", ".#"]));
        assert_eq!(o.cycles.len(), 1);
        assert_eq!(o.cycles[0].signed_area, 2);
        assert_eq!(o.cycles[0].len(), 8);
    }

    #[test]
    fn diagonal_background_makes_two_holes() {
        // the two background pixels touch only at a corner: two 4-holes
        let o = both(&blob_of(&["####", "#.##", "##.#", "####"]));
        assert_eq!(o.holes().count(), 2);
        assert_eq!(o.total_area(), 14);
    }

    #[test]
    fn rasterize_roundtrip_known_cases() {
        for rows in [&["#"][..], &["###", "#.#", "###"], &["#.#", ".#.", "#.#"]] {
            let img = BinaryImage::from_ascii(rows);
            let blob = &extract_blobs(&img, Connectivity::Eight)[0];
            let back = rasterize(&trace_graph(blob), img.width(), img.height()).unwrap();
            assert_eq!(back, img);
        }
    }

    #[test]
    fn rasterize_rejects_out_of_bounds() {
        let blob = blob_of(&["##"]);
        let err = rasterize(&trace_graph(&blob), 1, 1).unwrap_err();
        assert!(matches!(err, OutlineError::OutOfBounds { x: 2, .. }));
    }

    #[test]
    fn chain_code_roundtrip_and_size() {
        let blob = blob_of(&["###", "#.#", "###"]);
        let outline = trace_sweep(&blob);
        let bytes = encode_chain_code(std::slice::from_ref(&outline), 3, 3);
        // magic 4 + dims 2 + count 1 + per cycle (2 + 1 + ceil(n/4))
        assert_eq!(bytes.len(), 4 + 2 + 1 + (3 + 3) + (3 + 1));
        let (w, h, cycles) = decode_chain_code(&bytes).unwrap();
        assert_eq!((w, h), (3, 3));
        assert_eq!(cycles, outline.cycles);
    }

    #[test]
    fn chain_code_rejects_garbage() {
        assert!(decode_chain_code(b"nope").is_err());
        let blob = blob_of(&["#"]);
        let mut bytes = encode_chain_code(&[trace_graph(&blob)], 1, 1);
        bytes.pop();
        assert!(decode_chain_code(&bytes).is_err());
    }

    #[test]
    fn tiny_blob_on_big_canvas_compresses_hugely() {
        let mut img = BinaryImage::new(1000, 1000);
        img.set(500, 500, true);
        let blobs = extract_blobs(&img, Connectivity::Eight);
        let outlines: Vec<_> = blobs.iter().map(trace_sweep).collect();
        let report = compression_ratio(&outlines, 1000, 1000).unwrap();
        assert!(report.ratio > 1000.0, "{report:?}");
        assert_eq!(compression_ratio(&[], 10, 10), Err(OutlineError::EmptyPage));
    }

    #[test]
    fn solid_page_ratio_is_defined() {
        let img = BinaryImage::from_vec(64, 64, vec![true; 64 * 64]).unwrap();
        let blobs = extract_blobs(&img, Connectivity::Eight);
        let outlines: Vec<_> = blobs.iter().map(trace_graph).collect();
        let report = compression_ratio(&outlines, 64, 64).unwrap();
        assert!(report.ratio.is_finite() && report.ratio > 0.0);
    }
}
