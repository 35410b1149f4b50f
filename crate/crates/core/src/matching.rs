//! Outline comparison: normalization, cyclic DTW, projection matching and
//! single-link clustering of characters.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::outlines::{trace_graph, OutlineCycle};
use crate::segmentation::Blob;

pub type Point = (f64, f64);

/// Default number of DTW start rotations tried per comparison.
pub const DEFAULT_STARTS: usize = 16;

#[derive(Debug, Error, PartialEq)]
pub enum MatchError {
    #[error("cycle has {0} vertices, need at least 3")]
    TooFewVertices(usize),
    #[error("sample count {0} is below the minimum of 8")]
    TooFewSamples(usize),
    #[error("cycle has zero length")]
    Degenerate,
    #[error("no target outlines to project onto")]
    NoTargets,
    #[error("cannot normalize an empty group of cycles")]
    EmptyGroup,
}

/// Arc-length resampled cycle, centered at the origin with unit RMS radius.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NormalizedCycle {
    pub points: Vec<Point>,
}

impl NormalizedCycle {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn rotated(&self, start: usize) -> NormalizedCycle {
        let mut points = self.points.clone();
        let n = points.len();
        if n > 0 {
            points.rotate_left(start % n);
        }
        NormalizedCycle { points }
    }

    pub fn as_polyline(&self) -> Polyline<'_> {
        Polyline {
            points: &self.points,
            closed: true,
        }
    }
}

/// A chain of points, optionally closed back onto its first point.
#[derive(Clone, Copy, Debug)]
pub struct Polyline<'a> {
    pub points: &'a [Point],
    pub closed: bool,
}

impl Polyline<'_> {
    fn segments(&self) -> impl Iterator<Item = (Point, Point)> + '_ {
        let n = self.points.len();
        let count = match (self.closed, n) {
            (_, 0) => 0,
            (_, 1) => 1,
            (true, _) => n,
            (false, _) => n - 1,
        };
        (0..count).map(move |i| (self.points[i], self.points[(i + 1) % n]))
    }
}

fn dist(a: Point, b: Point) -> f64 {
    (a.0 - b.0).hypot(a.1 - b.1)
}

/// Resamples a closed polygon to `n` points evenly spaced along its
/// perimeter, starting at its first vertex.
pub fn resample_closed(vertices: &[Point], n: usize) -> Vec<Point> {
    let m = vertices.len();
    let seg_len: Vec<f64> = (0..m)
        .map(|i| dist(vertices[i], vertices[(i + 1) % m]))
        .collect();
    let perimeter: f64 = seg_len.iter().sum();
    let step = perimeter / n as f64;
    let mut out = Vec::with_capacity(n);
    let (mut seg, mut walked) = (0usize, 0f64);
    for k in 0..n {
        let target = k as f64 * step;
        while seg + 1 < m && walked + seg_len[seg] <= target {
            walked += seg_len[seg];
            seg += 1;
        }
        let (a, b) = (vertices[seg], vertices[(seg + 1) % m]);
        let t = if seg_len[seg] > 0.0 {
            ((target - walked) / seg_len[seg]).clamp(0.0, 1.0)
        } else {
            0.0
        };
        out.push((a.0 + t * (b.0 - a.0), a.1 + t * (b.1 - a.1)));
    }
    out
}

fn standardize(groups: &mut [Vec<Point>]) {
    let count: usize = groups.iter().map(Vec::len).sum();
    let (sx, sy) = groups
        .iter()
        .flatten()
        .fold((0.0, 0.0), |acc, p| (acc.0 + p.0, acc.1 + p.1));
    let (cx, cy) = (sx / count as f64, sy / count as f64);
    let ms: f64 = groups
        .iter()
        .flatten()
        .map(|p| (p.0 - cx).powi(2) + (p.1 - cy).powi(2))
        .sum::<f64>()
        / count as f64;
    let scale = ms.sqrt();
    for p in groups.iter_mut().flatten() {
        *p = ((p.0 - cx) / scale, (p.1 - cy) / scale);
    }
}

fn to_points(cycle: &OutlineCycle) -> Vec<Point> {
    cycle
        .vertices
        .iter()
        .map(|&(x, y)| (x as f64, y as f64))
        .collect()
}

/// Resample to `n` points by arc length, then translate the centroid to the
/// origin and scale the RMS radius to 1.
pub fn normalize(cycle: &OutlineCycle, n: usize) -> Result<NormalizedCycle, MatchError> {
    normalize_points(&to_points(cycle), n)
}

pub fn normalize_points(vertices: &[Point], n: usize) -> Result<NormalizedCycle, MatchError> {
    if vertices.len() < 3 {
        return Err(MatchError::TooFewVertices(vertices.len()));
    }
    if n < 8 {
        return Err(MatchError::TooFewSamples(n));
    }
    let perimeter: f64 = (0..vertices.len())
        .map(|i| dist(vertices[i], vertices[(i + 1) % vertices.len()]))
        .sum();
    if perimeter <= 0.0 {
        return Err(MatchError::Degenerate);
    }
    let mut groups = vec![resample_closed(vertices, n)];
    standardize(&mut groups);
    let points = groups.pop().unwrap();
    if points.iter().any(|p| !p.0.is_finite() || !p.1.is_finite()) {
        return Err(MatchError::Degenerate);
    }
    Ok(NormalizedCycle { points })
}

/// Normalizes several cycles in one shared frame (common centroid and RMS
/// radius). About `n` points in total are spread over the cycles in
/// proportion to their perimeters, at least 3 each.
pub fn normalize_group(cycles: &[OutlineCycle], n: usize) -> Result<Vec<NormalizedCycle>, MatchError> {
    if cycles.is_empty() {
        return Err(MatchError::EmptyGroup);
    }
    if n < 8 {
        return Err(MatchError::TooFewSamples(n));
    }
    let polys: Vec<Vec<Point>> = cycles.iter().map(to_points).collect();
    let lengths: Vec<f64> = polys
        .iter()
        .map(|p| (0..p.len()).map(|i| dist(p[i], p[(i + 1) % p.len()])).sum())
        .collect();
    let total: f64 = lengths.iter().sum();
    if total <= 0.0 {
        return Err(MatchError::Degenerate);
    }
    for p in &polys {
        if p.len() < 3 {
            return Err(MatchError::TooFewVertices(p.len()));
        }
    }
    let mut groups: Vec<Vec<Point>> = polys
        .iter()
        .zip(&lengths)
        .map(|(p, &len)| {
            let share = ((len / total) * n as f64).round() as usize;
            resample_closed(p, share.max(3))
        })
        .collect();
    standardize(&mut groups);
    Ok(groups
        .into_iter()
        .map(|points| NormalizedCycle { points })
        .collect())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Alignment {
    /// Index pairs into `a` and into `b` rotated by `b_start`.
    pub pairs: Vec<(usize, usize)>,
    pub b_start: usize,
    /// Sum of matched point distances divided by the sample count.
    pub cost: f64,
}

/// Classic DTW over arbitrary sequences. Returns the optimal warping path
/// (from `(0, 0)` to `(n-1, m-1)`) and its summed cost.
pub fn dtw<T, F>(a: &[T], b: &[T], cost: F) -> (Vec<(usize, usize)>, f64)
where
    F: Fn(&T, &T) -> f64,
{
    let (n, m) = (a.len(), b.len());
    if n == 0 || m == 0 {
        return (Vec::new(), 0.0);
    }
    let mut acc = vec![f64::INFINITY; n * m];
    for i in 0..n {
        for j in 0..m {
            let c = cost(&a[i], &b[j]);
            let prev = if i == 0 && j == 0 {
                0.0
            } else {
                let diag = if i > 0 && j > 0 { acc[(i - 1) * m + j - 1] } else { f64::INFINITY };
                let up = if i > 0 { acc[(i - 1) * m + j] } else { f64::INFINITY };
                let left = if j > 0 { acc[i * m + j - 1] } else { f64::INFINITY };
                diag.min(up).min(left)
            };
            acc[i * m + j] = c + prev;
        }
    }
    let total = acc[n * m - 1];
    let mut path = vec![(n - 1, m - 1)];
    let (mut i, mut j) = (n - 1, m - 1);
    while i > 0 || j > 0 {
        let candidates = [
            (i > 0 && j > 0).then(|| (i - 1, j - 1)),
            (i > 0).then(|| (i - 1, j)),
            (j > 0).then(|| (i, j - 1)),
        ];
        let (pi, pj) = candidates
            .into_iter()
            .flatten()
            .min_by(|p, q| acc[p.0 * m + p.1].total_cmp(&acc[q.0 * m + q.1]))
            .unwrap();
        i = pi;
        j = pj;
        path.push((i, j));
    }
    path.reverse();
    (path, total)
}

fn start_offsets(n: usize, starts: usize) -> Vec<usize> {
    let k = starts.clamp(1, n.max(1));
    let mut offsets: Vec<usize> = (0..k).map(|r| r * n / k).collect();
    offsets.dedup();
    offsets
}

/// DTW between two normalized cycles, trying `starts` evenly spaced start
/// rotations of `b`; the cheapest alignment wins.
pub fn dtw_align(a: &NormalizedCycle, b: &NormalizedCycle, starts: usize) -> Alignment {
    let n = a.len().max(1);
    start_offsets(b.len(), starts)
        .into_iter()
        .map(|s| {
            let rotated = b.rotated(s);
            let (pairs, total) = dtw(&a.points, &rotated.points, |p, q| dist(*p, *q));
            Alignment {
                pairs,
                b_start: s,
                cost: total / n as f64,
            }
        })
        .min_by(|x, y| x.cost.total_cmp(&y.cost))
        .expect("at least one start offset")
}

/// Cost of [`dtw_align`] without the path. Point distances are computed
/// once for all rotations and a rotation is abandoned as soon as a whole DP
/// row exceeds the best total found so far.
pub fn dtw_cost(a: &NormalizedCycle, b: &NormalizedCycle, starts: usize) -> f64 {
    let (n, m) = (a.len(), b.len());
    if n == 0 || m == 0 {
        return 0.0;
    }
    let table: Vec<f64> = a
        .points
        .iter()
        .flat_map(|p| b.points.iter().map(move |q| dist(*p, *q)))
        .collect();
    let mut best = f64::INFINITY;
    let mut prev = vec![0.0; m];
    let mut cur = vec![0.0; m];
    'rotation: for s in start_offsets(m, starts) {
        let c = |i: usize, j: usize| table[i * m + (j + s) % m];
        let mut run = 0.0;
        for j in 0..m {
            run += c(0, j);
            prev[j] = run;
        }
        for i in 1..n {
            cur[0] = c(i, 0) + prev[0];
            let mut row_min = cur[0];
            for j in 1..m {
                cur[j] = c(i, j) + prev[j - 1].min(prev[j]).min(cur[j - 1]);
                row_min = row_min.min(cur[j]);
            }
            std::mem::swap(&mut prev, &mut cur);
            if row_min >= best {
                continue 'rotation;
            }
        }
        best = best.min(prev[m - 1]);
    }
    best / n as f64
}

/// Rotations tried on both sides, so the result does not depend on argument
/// order.
pub fn dtw_distance_symmetric(a: &NormalizedCycle, b: &NormalizedCycle, starts: usize) -> f64 {
    dtw_cost(a, b, starts).min(dtw_cost(b, a, starts))
}

fn point_segment_distance(p: Point, a: Point, b: Point) -> f64 {
    let (dx, dy) = (b.0 - a.0, b.1 - a.1);
    let len2 = dx * dx + dy * dy;
    if len2 == 0.0 {
        return dist(p, a);
    }
    let t = (((p.0 - a.0) * dx + (p.1 - a.1) * dy) / len2).clamp(0.0, 1.0);
    dist(p, (a.0 + t * dx, a.1 + t * dy))
}

/// Mean distance from each point to the nearest segment of any target chain.
pub fn project_onto(points: &[Point], targets: &[Polyline<'_>]) -> Result<f64, MatchError> {
    if targets.iter().all(|t| t.points.is_empty()) {
        return Err(MatchError::NoTargets);
    }
    let total: f64 = points
        .iter()
        .map(|&p| {
            targets
                .iter()
                .flat_map(Polyline::segments)
                .map(|(a, b)| point_segment_distance(p, a, b))
                .fold(f64::INFINITY, f64::min)
        })
        .sum();
    Ok(total / points.len().max(1) as f64)
}

/// Projection cost of `a` onto the union of the closed `targets`.
pub fn project_match(a: &NormalizedCycle, targets: &[NormalizedCycle]) -> Result<f64, MatchError> {
    let polys: Vec<Polyline<'_>> = targets.iter().map(NormalizedCycle::as_polyline).collect();
    project_onto(&a.points, &polys)
}

/// Score for "`parts` is a broken version of `whole`": the worse of the two
/// projection directions. `parts` should share one frame (see
/// [`normalize_group`]).
pub fn match_broken(parts: &[NormalizedCycle], whole: &NormalizedCycle) -> Result<f64, MatchError> {
    if parts.is_empty() {
        return Err(MatchError::EmptyGroup);
    }
    let forward = project_match(whole, parts)?;
    let joined: Vec<Point> = parts.iter().flat_map(|p| p.points.iter().copied()).collect();
    let backward = project_onto(&joined, &[whole.as_polyline()])?;
    Ok(forward.max(backward))
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    /// Symmetric cyclic DTW.
    #[default]
    Dtw,
    /// Smaller of DTW and the broken-match score.
    DtwOrBroken,
}

/// One character to cluster: its cycles normalized in a shared frame (outer
/// first) and its outer cycle normalized alone.
#[derive(Clone, Debug, PartialEq)]
pub struct Shape {
    pub outer: NormalizedCycle,
    pub group: Vec<NormalizedCycle>,
}

impl Shape {
    pub fn from_outer(outer: NormalizedCycle) -> Shape {
        Shape {
            group: vec![outer.clone()],
            outer,
        }
    }
}

/// Traces `blob` and normalizes its outline with `n` samples per cycle.
pub fn shape_from_blob(blob: &Blob, n: usize) -> Result<Shape, MatchError> {
    let outline = trace_graph(blob);
    let mut cycles = outline.cycles.clone();
    cycles.sort_by_key(|c| -c.orientation);
    let outer = normalize(&cycles[0], n)?;
    let group = normalize_group(&cycles, n)?;
    Ok(Shape { outer, group })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Clustering {
    pub threshold: f64,
    pub labels: Vec<usize>,
}

impl Clustering {
    pub fn cluster_count(&self) -> usize {
        self.labels.iter().max().map_or(0, |m| m + 1)
    }
}

/// Pairwise distance matrix, row-major, computed in parallel over rows.
pub fn distance_matrix(shapes: &[Shape], metric: Metric, starts: usize) -> Vec<Vec<f64>> {
    let n = shapes.len();
    let rows: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|i| {
            (0..n)
                .map(|j| {
                    if j <= i {
                        0.0
                    } else {
                        pair_distance(&shapes[i], &shapes[j], metric, starts)
                    }
                })
                .collect()
        })
        .collect();
    let mut full = rows;
    for i in 0..n {
        for j in 0..i {
            full[i][j] = full[j][i];
        }
    }
    full
}

fn pair_distance(a: &Shape, b: &Shape, metric: Metric, starts: usize) -> f64 {
    let d = dtw_distance_symmetric(&a.outer, &b.outer, starts);
    match metric {
        Metric::Dtw => d,
        Metric::DtwOrBroken if a.group.len() != b.group.len() => {
            let broken = |parts: &Shape, whole: &Shape| {
                match_broken(&parts.group, &whole.outer).unwrap_or(f64::INFINITY)
            };
            let b_score = if a.group.len() > b.group.len() {
                broken(a, b)
            } else {
                broken(b, a)
            };
            d.min(b_score)
        }
        Metric::DtwOrBroken => d,
    }
}

/// Single-link clustering of a precomputed distance matrix cut at
/// `threshold`. Labels are numbered in order of first appearance.
pub fn cluster_matrix(distances: &[Vec<f64>], threshold: f64) -> Clustering {
    let n = distances.len();
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(parent: &mut [usize], mut i: usize) -> usize {
        while parent[i] != i {
            parent[i] = parent[parent[i]];
            i = parent[i];
        }
        i
    }
    for i in 0..n {
        for j in i + 1..n {
            if distances[i][j] <= threshold {
                let (ri, rj) = (find(&mut parent, i), find(&mut parent, j));
                if ri != rj {
                    parent[ri.max(rj)] = ri.min(rj);
                }
            }
        }
    }
    let mut ids = vec![usize::MAX; n];
    let mut next = 0;
    let mut labels = Vec::with_capacity(n);
    for i in 0..n {
        let r = find(&mut parent, i);
        if ids[r] == usize::MAX {
            ids[r] = next;
            next += 1;
        }
        labels.push(ids[r]);
    }
    Clustering { threshold, labels }
}

pub fn cluster(shapes: &[Shape], threshold: f64, metric: Metric, starts: usize) -> Clustering {
    cluster_matrix(&distance_matrix(shapes, metric, starts), threshold)
}

/// CSV export: a header row of outline ids, then one row per outline.
pub fn distance_matrix_csv(ids: &[String], distances: &[Vec<f64>]) -> String {
    let mut out = ids.join(",");
    out.push('\n');
    for row in distances {
        let cells: Vec<String> = row.iter().map(|d| format!("{d:.9}")).collect();
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    out
}
