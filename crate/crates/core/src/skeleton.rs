//! Thinning to one-pixel-wide skeletons and conversion to graphs.
//!
//! Thinning is Zhang–Suen with two subiterations per pass. Candidates are
//! marked against a snapshot as usual, but each deletion is confirmed against
//! the current image: the pixel must still be simple (8-connectivity number
//! 1). That keeps the number of components and holes intact, including on
//! 2x2 blocks and two-pixel diagonals that plain Zhang–Suen erases. A final
//! pass removes remaining simple, non-end pixels from full 2x2 blocks.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::raster::BinaryImage;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum SkeletonError {
    #[error("skeleton is not thin: full 2x2 block at ({x}, {y})")]
    NotThin { x: usize, y: usize },
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Skeleton {
    pub mask: BinaryImage,
}

/// Neighbours of (x, y) in the order P2..P9: N, NE, E, SE, S, SW, W, NW.
fn neighbours(img: &BinaryImage, x: usize, y: usize) -> [bool; 8] {
    let (x, y) = (x as i64, y as i64);
    [
        img.get_signed(x, y - 1),
        img.get_signed(x + 1, y - 1),
        img.get_signed(x + 1, y),
        img.get_signed(x + 1, y + 1),
        img.get_signed(x, y + 1),
        img.get_signed(x - 1, y + 1),
        img.get_signed(x - 1, y),
        img.get_signed(x - 1, y - 1),
    ]
}

fn transitions(n: &[bool; 8]) -> usize {
    (0..8).filter(|&i| !n[i] && n[(i + 1) % 8]).count()
}

/// Yokoi 8-connectivity number; a foreground pixel is simple iff it is 1.
fn connectivity_number(n: &[bool; 8]) -> usize {
    let bg = |i: usize| !n[i % 8] as usize;
    // 4-neighbours sit at even indices (N, E, S, W)
    [0usize, 2, 4, 6]
        .iter()
        .map(|&k| bg(k) - bg(k) * bg(k + 1) * bg(k + 2))
        .sum()
}

fn is_simple(n: &[bool; 8]) -> bool {
    connectivity_number(n) == 1
}

fn zhang_suen_candidate(n: &[bool; 8], first: bool) -> bool {
    let count = n.iter().filter(|&&b| b).count();
    if !(2..=6).contains(&count) || transitions(n) != 1 {
        return false;
    }
    let [p2, _, p4, _, p6, _, p8, _] = *n;
    if first {
        !(p2 && p4 && p6) && !(p4 && p6 && p8)
    } else {
        !(p2 && p4 && p8) && !(p2 && p6 && p8)
    }
}

fn deletable_now(img: &BinaryImage, x: usize, y: usize) -> bool {
    let n = neighbours(img, x, y);
    n.iter().filter(|&&b| b).count() >= 2 && is_simple(&n)
}

pub fn skeletonize(img: &BinaryImage) -> Skeleton {
    let mut mask = img.clone();
    loop {
        let mut changed = false;
        for first in [true, false] {
            let marked: Vec<(usize, usize)> = mask
                .foreground_pixels()
                .filter(|&(x, y)| zhang_suen_candidate(&neighbours(&mask, x, y), first))
                .collect();
            for (x, y) in marked {
                if is_simple(&neighbours(&mask, x, y)) {
                    mask.set(x, y, false);
                    changed = true;
                }
            }
        }
        if !changed {
            break;
        }
    }
    remove_full_blocks(&mut mask);
    Skeleton { mask }
}

fn full_block_at(mask: &BinaryImage, x: usize, y: usize) -> bool {
    x + 1 < mask.width()
        && y + 1 < mask.height()
        && mask.get(x, y)
        && mask.get(x + 1, y)
        && mask.get(x, y + 1)
        && mask.get(x + 1, y + 1)
}

/// Staircase cleanup: while some 2x2 block is fully set, delete one of its
/// pixels that is simple and not an end point.
fn remove_full_blocks(mask: &mut BinaryImage) {
    loop {
        let mut changed = false;
        for y in 0..mask.height().saturating_sub(1) {
            for x in 0..mask.width().saturating_sub(1) {
                if !full_block_at(mask, x, y) {
                    continue;
                }
                let corners = [(x, y), (x + 1, y), (x, y + 1), (x + 1, y + 1)];
                if let Some(&(px, py)) = corners.iter().find(|&&(px, py)| deletable_now(mask, px, py)) {
                    mask.set(px, py, false);
                    changed = true;
                }
            }
        }
        if !changed {
            return;
        }
    }
}

pub fn first_full_block(mask: &BinaryImage) -> Option<(usize, usize)> {
    (0..mask.height().saturating_sub(1))
        .flat_map(|y| (0..mask.width().saturating_sub(1)).map(move |x| (x, y)))
        .find(|&(x, y)| full_block_at(mask, x, y))
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GraphNode {
    pub x: usize,
    pub y: usize,
    pub degree: usize,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GraphEdge {
    pub a: usize,
    pub b: usize,
    /// Interior pixels between the two end nodes.
    #[serde(skip)]
    pub path: Vec<(usize, usize)>,
    pub path_len: usize,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SkeletonGraph {
    pub nodes: Vec<GraphNode>,
    pub edges: Vec<GraphEdge>,
}

type Pixel = (usize, usize);

/// Skeleton adjacency: 4-neighbours, plus diagonal neighbours that are not
/// already reachable through a shared 4-neighbour. This stops the corner of
/// an L or the arms of a plus from counting as branch points.
fn graph_neighbours(mask: &BinaryImage, (x, y): Pixel) -> Vec<Pixel> {
    let (xi, yi) = (x as i64, y as i64);
    let mut out = Vec::new();
    for (dx, dy) in [(0i64, -1i64), (1, 0), (0, 1), (-1, 0)] {
        if mask.get_signed(xi + dx, yi + dy) {
            out.push(((xi + dx) as usize, (yi + dy) as usize));
        }
    }
    for (dx, dy) in [(1i64, -1i64), (1, 1), (-1, 1), (-1, -1)] {
        if mask.get_signed(xi + dx, yi + dy)
            && !mask.get_signed(xi + dx, yi)
            && !mask.get_signed(xi, yi + dy)
        {
            out.push(((xi + dx) as usize, (yi + dy) as usize));
        }
    }
    out
}

pub fn to_graph(s: &Skeleton) -> Result<SkeletonGraph, SkeletonError> {
    let mask = &s.mask;
    if let Some((x, y)) = first_full_block(mask) {
        return Err(SkeletonError::NotThin { x, y });
    }
    let adjacency: BTreeMap<Pixel, Vec<Pixel>> = mask
        .foreground_pixels()
        .map(|(x, y)| ((x, y), graph_neighbours(mask, (x, y))))
        .collect();

    let mut graph = SkeletonGraph::default();
    let mut node_index: BTreeMap<Pixel, usize> = BTreeMap::new();
    // lexicographic (x, y) order
    for (&p, nbrs) in &adjacency {
        if nbrs.len() != 2 {
            node_index.insert(p, 0);
        }
    }
    for (i, (&(x, y), idx)) in node_index.iter_mut().enumerate() {
        *idx = i;
        graph.nodes.push(GraphNode {
            x,
            y,
            degree: adjacency[&(x, y)].len(),
        });
    }

    let mut visited: BTreeSet<Pixel> = BTreeSet::new();
    let mut direct: BTreeSet<(Pixel, Pixel)> = BTreeSet::new();
    let walk = |start: Pixel, first: Pixel, visited: &mut BTreeSet<Pixel>, stop: &dyn Fn(Pixel) -> bool| {
        let mut path = Vec::new();
        let (mut prev, mut cur) = (start, first);
        while !stop(cur) {
            visited.insert(cur);
            path.push(cur);
            let next = adjacency[&cur]
                .iter()
                .copied()
                .find(|&q| q != prev)
                .expect("degree-2 pixel has a second neighbour");
            prev = cur;
            cur = next;
        }
        (path, cur)
    };

    let nodes: Vec<Pixel> = node_index.keys().copied().collect();
    for &n in &nodes {
        for &q in &adjacency[&n] {
            if node_index.contains_key(&q) {
                let key = (n.min(q), n.max(q));
                if direct.insert(key) {
                    graph.edges.push(GraphEdge {
                        a: node_index[&key.0],
                        b: node_index[&key.1],
                        path: Vec::new(),
                        path_len: 0,
                    });
                }
                continue;
            }
            if visited.contains(&q) {
                continue;
            }
            let (path, end) = walk(n, q, &mut visited, &|p| node_index.contains_key(&p));
            graph.edges.push(GraphEdge {
                a: node_index[&n],
                b: node_index[&end],
                path_len: path.len(),
                path,
            });
        }
    }

    // what is left are closed loops of degree-2 pixels
    for &p in adjacency.keys() {
        if node_index.contains_key(&p) || visited.contains(&p) {
            continue;
        }
        let anchor = graph.nodes.len();
        node_index.insert(p, anchor);
        graph.nodes.push(GraphNode {
            x: p.0,
            y: p.1,
            degree: 2,
        });
        visited.insert(p);
        let first = adjacency[&p][0];
        let (path, _) = walk(p, first, &mut visited, &|q| q == p);
        graph.edges.push(GraphEdge {
            a: anchor,
            b: anchor,
            path_len: path.len(),
            path,
        });
    }
    Ok(graph)
}
