//! Glyph atlases, n-gram training plans and synthetic line rendering.

use std::collections::{BTreeMap, HashSet};
use std::io::{BufRead, Write};
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::raster::{decode_pgm_mask, encode_pgm_mask, BinaryImage};

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("glyph {id} is {height} rows tall, expected {expected}")]
    HeightMismatch { id: u32, height: usize, expected: usize },
    #[error("join overlap {overlap} must be smaller than the narrowest glyph ({min_width})")]
    OverlapTooLarge { overlap: usize, min_width: usize },
    #[error("symbol id {0} is not in the glyph set")]
    UnknownSymbol(u32),
    #[error("symbol id {0} is reserved")]
    ReservedId(u32),
    #[error("glyph set is empty")]
    Empty,
    #[error("atlas i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error("bad atlas: {0}")]
    Format(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GlyphGroup {
    Letter,
    Digit,
    Diacritic,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GlyphSet {
    glyphs: BTreeMap<u32, BinaryImage>,
    groups: BTreeMap<u32, GlyphGroup>,
    chars: BTreeMap<u32, char>,
    height: usize,
    pub join_overlap: usize,
    pub space_id: u32,
    pub space_width: usize,
    pub space_char: char,
}

/// On-disk atlas metadata, stored as `atlas.json` next to `<id>.pgm` files.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AtlasMeta {
    pub join_overlap: usize,
    pub space_id: u32,
    pub space_width: usize,
    #[serde(default = "default_space_char")]
    pub space_char: char,
    pub groups: BTreeMap<u32, GlyphGroup>,
    #[serde(default)]
    pub chars: BTreeMap<u32, char>,
}

fn default_space_char() -> char {
    ' '
}

const DIGITS_5X7: [[&str; 7]; 10] = [
    [".###.", "#...#", "#..##", "#.#.#", "##..#", "#...#", ".###."],
    ["..#..", ".##..", "..#..", "..#..", "..#..", "..#..", ".###."],
    [".###.", "#...#", "....#", "...#.", "..#..", ".#...", "#####"],
    ["#####", "...#.", "..#..", "...#.", "....#", "#...#", ".###."],
    ["...#.", "..##.", ".#.#.", "#..#.", "#####", "...#.", "...#."],
    ["#####", "#....", "####.", "....#", "....#", "#...#", ".###."],
    ["..##.", ".#...", "#....", "####.", "#...#", "#...#", ".###."],
    ["#####", "....#", "...#.", "..#..", ".#...", ".#...", ".#..."],
    [".###.", "#...#", "#...#", ".###.", "#...#", "#...#", ".###."],
    [".###.", "#...#", "#...#", ".####", "....#", "...#.", ".##.."],
];

impl GlyphSet {
    pub fn new(
        glyphs: BTreeMap<u32, BinaryImage>,
        groups: BTreeMap<u32, GlyphGroup>,
        join_overlap: usize,
        space_id: u32,
        space_width: usize,
    ) -> Result<GlyphSet, CorpusError> {
        let height = glyphs.values().next().ok_or(CorpusError::Empty)?.height();
        for (&id, g) in &glyphs {
            if id == 0 || id == space_id {
                return Err(CorpusError::ReservedId(id));
            }
            if g.height() != height {
                return Err(CorpusError::HeightMismatch {
                    id,
                    height: g.height(),
                    expected: height,
                });
            }
            if !groups.contains_key(&id) {
                return Err(CorpusError::Format(format!("glyph {id} has no group")));
            }
        }
        if space_id == 0 {
            return Err(CorpusError::ReservedId(0));
        }
        if let Some(&id) = groups.keys().find(|id| !glyphs.contains_key(id)) {
            return Err(CorpusError::UnknownSymbol(id));
        }
        let min_width = glyphs.values().map(|g| g.width()).min().unwrap_or(0);
        if join_overlap >= min_width {
            return Err(CorpusError::OverlapTooLarge {
                overlap: join_overlap,
                min_width,
            });
        }
        Ok(GlyphSet {
            glyphs,
            groups,
            chars: BTreeMap::new(),
            height,
            join_overlap,
            space_id,
            space_width,
            space_char: ' ',
        })
    }

    /// Ten 5x7 digits padded to 9 rows: ids 1..=10 are '0'..='9', id 11 is
    /// the space.
    pub fn builtin_digits(join_overlap: usize) -> Result<GlyphSet, CorpusError> {
        let mut glyphs = BTreeMap::new();
        let mut groups = BTreeMap::new();
        let mut chars = BTreeMap::new();
        for (i, rows) in DIGITS_5X7.iter().enumerate() {
            let mut padded = vec!["....."];
            padded.extend(rows.iter());
            padded.push(".....");
            let id = i as u32 + 1;
            glyphs.insert(id, BinaryImage::from_ascii(&padded));
            groups.insert(id, GlyphGroup::Digit);
            chars.insert(id, char::from(b'0' + i as u8));
        }
        let mut gs = GlyphSet::new(glyphs, groups, join_overlap, 11, 3)?;
        gs.chars = chars;
        Ok(gs)
    }

    pub fn with_chars(mut self, chars: BTreeMap<u32, char>) -> Result<GlyphSet, CorpusError> {
        if let Some(&id) = chars.keys().find(|id| !self.glyphs.contains_key(id)) {
            return Err(CorpusError::UnknownSymbol(id));
        }
        self.chars = chars;
        Ok(self)
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn ids(&self) -> impl Iterator<Item = u32> + '_ {
        self.glyphs.keys().copied()
    }

    pub fn glyph(&self, id: u32) -> Option<&BinaryImage> {
        self.glyphs.get(&id)
    }

    pub fn group(&self, id: u32) -> Option<GlyphGroup> {
        self.groups.get(&id).copied()
    }

    pub fn contains(&self, id: u32) -> bool {
        id == self.space_id || self.glyphs.contains_key(&id)
    }

    /// Glyph ids followed by the space id: the symbols a recognizer must know.
    pub fn symbols(&self) -> Vec<u32> {
        self.ids().chain([self.space_id]).collect()
    }

    pub fn char_of(&self, id: u32) -> Option<char> {
        if id == self.space_id {
            Some(self.space_char)
        } else {
            self.chars.get(&id).copied()
        }
    }

    /// Renders ids as text; ids without a character become `?`.
    pub fn to_text(&self, ids: &[u32]) -> String {
        ids.iter().map(|&id| self.char_of(id).unwrap_or('?')).collect()
    }

    pub fn from_text(&self, text: &str) -> Result<Vec<u32>, CorpusError> {
        text.chars()
            .map(|c| {
                if c == self.space_char {
                    return Ok(self.space_id);
                }
                self.chars
                    .iter()
                    .find(|(_, &ch)| ch == c)
                    .map(|(&id, _)| id)
                    .ok_or(CorpusError::UnknownSymbol(c as u32))
            })
            .collect()
    }

    pub fn meta(&self) -> AtlasMeta {
        AtlasMeta {
            join_overlap: self.join_overlap,
            space_id: self.space_id,
            space_width: self.space_width,
            space_char: self.space_char,
            groups: self.groups.clone(),
            chars: self.chars.clone(),
        }
    }

    pub fn save_atlas(&self, dir: impl AsRef<Path>) -> Result<(), CorpusError> {
        let dir = dir.as_ref();
        std::fs::create_dir_all(dir)?;
        for (id, g) in &self.glyphs {
            std::fs::write(dir.join(format!("{id}.pgm")), encode_pgm_mask(g))?;
        }
        let json = serde_json::to_string_pretty(&self.meta()).expect("atlas meta serializes");
        std::fs::write(dir.join("atlas.json"), json + "\n")?;
        Ok(())
    }

    pub fn load_atlas(dir: impl AsRef<Path>) -> Result<GlyphSet, CorpusError> {
        let dir = dir.as_ref();
        let meta: AtlasMeta = serde_json::from_slice(&std::fs::read(dir.join("atlas.json"))?)
            .map_err(|e| CorpusError::Format(format!("atlas.json: {e}")))?;
        let mut glyphs = BTreeMap::new();
        for &id in meta.groups.keys() {
            let path = dir.join(format!("{id}.pgm"));
            let bytes = std::fs::read(&path)?;
            let img = decode_pgm_mask(&bytes).map_err(|e| CorpusError::Format(format!("{}: {e}", path.display())))?;
            glyphs.insert(id, img);
        }
        let mut gs = GlyphSet::new(glyphs, meta.groups, meta.join_overlap, meta.space_id, meta.space_width)?;
        gs.space_char = meta.space_char;
        gs.with_chars(meta.chars)
    }
}

/// Ordered, duplicate-free list of training strings.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct NgramPlan {
    pub strings: Vec<Vec<u32>>,
}

impl NgramPlan {
    pub fn len(&self) -> usize {
        self.strings.len()
    }

    pub fn is_empty(&self) -> bool {
        self.strings.is_empty()
    }
}

/// Unigrams (no diacritics), bigrams (no diacritic pairs), `x space y`
/// trigrams over non-diacritics, then `extras`; first occurrence wins.
pub fn build_plan(gs: &GlyphSet, extras: &[Vec<u32>]) -> Result<NgramPlan, CorpusError> {
    for s in extras {
        if let Some(&id) = s.iter().find(|&&id| !gs.contains(id)) {
            return Err(CorpusError::UnknownSymbol(id));
        }
    }
    let all: Vec<u32> = gs.ids().collect();
    let is_diacritic = |id: u32| gs.group(id) == Some(GlyphGroup::Diacritic);
    let bases: Vec<u32> = all.iter().copied().filter(|&id| !is_diacritic(id)).collect();

    let mut candidates: Vec<Vec<u32>> = bases.iter().map(|&a| vec![a]).collect();
    for &a in &all {
        for &b in &all {
            if !(is_diacritic(a) && is_diacritic(b)) {
                candidates.push(vec![a, b]);
            }
        }
    }
    for &a in &bases {
        for &b in &bases {
            candidates.push(vec![a, gs.space_id, b]);
        }
    }
    candidates.extend(extras.iter().cloned());

    let mut seen = HashSet::new();
    let strings = candidates.into_iter().filter(|s| seen.insert(s.clone())).collect();
    Ok(NgramPlan { strings })
}

/// Places glyphs left to right. Consecutive glyphs overlap by
/// `join_overlap` columns (ink is OR-ed), including across spaces; a space
/// advances the pen by `space_width`. Each background pixel then turns to ink
/// with probability `noise`.
pub fn synthesize_line(
    gs: &GlyphSet,
    text: &[u32],
    noise: f64,
    seed: u64,
) -> Result<(BinaryImage, Vec<u32>), CorpusError> {
    let mut placements = Vec::with_capacity(text.len());
    let mut cursor = 0usize;
    let mut placed_any = false;
    for &id in text {
        if id == gs.space_id {
            cursor += gs.space_width;
            continue;
        }
        let g = gs.glyphs.get(&id).ok_or(CorpusError::UnknownSymbol(id))?;
        let start = if placed_any { cursor - gs.join_overlap } else { cursor };
        placements.push((start, g));
        cursor = start + g.width();
        placed_any = true;
    }
    let mut img = BinaryImage::new(cursor, gs.height);
    for (x0, g) in placements {
        for (x, y) in g.foreground_pixels() {
            img.set(x0 + x, y, true);
        }
    }
    if noise > 0.0 {
        add_salt(&mut img, noise, seed);
    }
    Ok((img, text.to_vec()))
}

/// Flips background pixels to ink independently with probability `p`.
pub fn add_salt(img: &mut BinaryImage, p: f64, seed: u64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for y in 0..img.height() {
        for x in 0..img.width() {
            if rng.gen::<f64>() < p {
                img.set(x, y, true);
            }
        }
    }
}

/// Renders every text in parallel; line `i` uses seed `seed ^ i`.
pub fn synthesize_corpus(
    gs: &GlyphSet,
    texts: &[Vec<u32>],
    noise: f64,
    seed: u64,
) -> Result<Vec<(BinaryImage, Vec<u32>, u64)>, CorpusError> {
    texts
        .par_iter()
        .enumerate()
        .map(|(i, t)| {
            let s = seed ^ i as u64;
            synthesize_line(gs, t, noise, s).map(|(img, label)| (img, label, s))
        })
        .collect()
}

/// `count` random texts with lengths in `min_len..=max_len`. Spaces never
/// lead, trail or repeat.
pub fn random_texts(gs: &GlyphSet, count: usize, min_len: usize, max_len: usize, space_rate: f64, seed: u64) -> Vec<Vec<u32>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let ids: Vec<u32> = gs.ids().filter(|&id| gs.group(id) != Some(GlyphGroup::Diacritic)).collect();
    (0..count)
        .map(|_| {
            let len = rng.gen_range(min_len..=max_len);
            let mut text = Vec::with_capacity(len);
            while text.len() < len {
                let can_space = !text.is_empty() && text.last() != Some(&gs.space_id) && text.len() + 1 < len;
                if can_space && rng.gen::<f64>() < space_rate {
                    text.push(gs.space_id);
                } else {
                    text.push(ids[rng.gen_range(0..ids.len())]);
                }
            }
            text
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ManifestRecord {
    pub image_path: PathBuf,
    pub label_ids: Vec<u32>,
    pub seed: u64,
}

pub fn write_manifest(records: &[ManifestRecord], mut out: impl Write) -> std::io::Result<()> {
    for r in records {
        serde_json::to_writer(&mut out, r)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

pub fn read_manifest(input: impl BufRead) -> Result<Vec<ManifestRecord>, CorpusError> {
    let mut records = Vec::new();
    for (n, line) in input.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        records.push(serde_json::from_str(&line).map_err(|e| CorpusError::Format(format!("manifest line {}: {e}", n + 1)))?);
    }
    Ok(records)
}
