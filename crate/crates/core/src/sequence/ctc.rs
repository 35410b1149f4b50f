//! Connectionist temporal classification in the log domain.
//!
//! Labels are column indices into a [`LogProbMatrix`]; column 0 is the
//! blank. Every product of probabilities is a sum of logs and every sum goes
//! through a max-shifted log-sum-exp, so nothing underflows however long
//! the line: the forward variables only ever hold log-probabilities bounded
//! below by `T * min log p`, which stays finite in f64 for any realistic T.

use thiserror::Error;

pub const BLANK: u32 = 0;

#[derive(Debug, Error, PartialEq)]
pub enum CtcError {
    #[error("label of length {len} needs at least {needed} frames, got {frames}")]
    Infeasible {
        len: usize,
        needed: usize,
        frames: usize,
    },
    #[error("label {label} outside the {classes} output classes (or is the blank)")]
    BadLabel { label: u32, classes: usize },
    #[error("log-sum-exp of an empty list")]
    EmptyInput,
    #[error("row {row} is not a log-probability distribution (log-sum-exp {lse})")]
    NotNormalized { row: usize, lse: f64 },
    #[error("matrix has {rows} rows of {cols} columns but {len} values")]
    Shape { rows: usize, cols: usize, len: usize },
}

/// Per-frame log-probabilities over the blank and the alphabet.
#[derive(Clone, Debug, PartialEq)]
pub struct LogProbMatrix {
    rows: usize,
    cols: usize,
    values: Vec<f64>,
}

impl LogProbMatrix {
    /// Wraps values that already form log-distributions row by row (checked
    /// to 1e-9).
    pub fn new(rows: usize, cols: usize, values: Vec<f64>) -> Result<Self, CtcError> {
        if values.len() != rows * cols || cols == 0 {
            return Err(CtcError::Shape {
                rows,
                cols,
                len: values.len(),
            });
        }
        let m = LogProbMatrix { rows, cols, values };
        for r in 0..rows {
            let lse = stable_logsumexp(m.row(r))?;
            if (lse.abs() > 1e-9) || lse.is_nan() {
                return Err(CtcError::NotNormalized { row: r, lse });
            }
        }
        Ok(m)
    }

    /// Row-wise log-softmax of raw scores.
    pub fn from_logits(rows: usize, cols: usize, logits: &[f64]) -> Result<Self, CtcError> {
        if logits.len() != rows * cols || cols == 0 {
            return Err(CtcError::Shape {
                rows,
                cols,
                len: logits.len(),
            });
        }
        let mut values = Vec::with_capacity(logits.len());
        for row in logits.chunks(cols) {
            let lse = stable_logsumexp(row)?;
            values.extend(row.iter().map(|&z| z - lse));
        }
        Ok(LogProbMatrix { rows, cols, values })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, t: usize) -> &[f64] {
        &self.values[t * self.cols..(t + 1) * self.cols]
    }

    pub fn get(&self, t: usize, k: usize) -> f64 {
        self.values[t * self.cols + k]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }
}

/// `ln(sum(exp(v)))` shifted by the maximum. Returns `-inf` only when every
/// input is `-inf`.
pub fn stable_logsumexp(values: &[f64]) -> Result<f64, CtcError> {
    let max = values
        .iter()
        .copied()
        .reduce(f64::max)
        .ok_or(CtcError::EmptyInput)?;
    if max == f64::NEG_INFINITY {
        return Ok(f64::NEG_INFINITY);
    }
    if max == f64::INFINITY {
        return Ok(f64::INFINITY);
    }
    Ok(max + values.iter().map(|&v| (v - max).exp()).sum::<f64>().ln())
}

#[inline]
fn lse2(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let (hi, lo) = if a > b { (a, b) } else { (b, a) };
    hi + (lo - hi).exp().ln_1p()
}

/// Merge runs of equal ids, then drop blanks.
pub fn collapse(path: &[u32]) -> Vec<u32> {
    let mut out = Vec::new();
    let mut prev = None;
    for &id in path {
        if Some(id) != prev && id != BLANK {
            out.push(id);
        }
        prev = Some(id);
    }
    out
}

/// Minimum number of frames a label needs: one per symbol plus a blank
/// between each pair of equal neighbours.
pub fn required_frames(label: &[u32]) -> usize {
    label.len() + label.windows(2).filter(|w| w[0] == w[1]).count()
}

/// Per-frame argmax (lowest class on ties), then collapse.
pub fn decode_best_path(p: &LogProbMatrix) -> Vec<u32> {
    let path: Vec<u32> = (0..p.rows())
        .map(|t| {
            let row = p.row(t);
            let mut best = 0;
            for k in 1..row.len() {
                if row[k] > row[best] {
                    best = k;
                }
            }
            best as u32
        })
        .collect();
    collapse(&path)
}

/// Label interleaved with blanks: `_ l1 _ l2 _ ... lL _`.
fn extended(label: &[u32]) -> Vec<u32> {
    let mut ext = Vec::with_capacity(2 * label.len() + 1);
    ext.push(BLANK);
    for &l in label {
        ext.push(l);
        ext.push(BLANK);
    }
    ext
}

fn check(p: &LogProbMatrix, label: &[u32]) -> Result<(), CtcError> {
    for &l in label {
        if l == BLANK || l as usize >= p.cols() {
            return Err(CtcError::BadLabel {
                label: l,
                classes: p.cols(),
            });
        }
    }
    let needed = required_frames(label);
    if p.rows() < needed || p.rows() == 0 {
        return Err(CtcError::Infeasible {
            len: label.len(),
            needed: needed.max(1),
            frames: p.rows(),
        });
    }
    Ok(())
}

/// Whether the forward recursion may skip from `s - 2` to `s`.
fn can_skip(ext: &[u32], s: usize) -> bool {
    s >= 2 && ext[s] != BLANK && ext[s] != ext[s - 2]
}

/// Negative log-likelihood of `label` under `p`, summed over all alignments.
pub fn ctc_loss(p: &LogProbMatrix, label: &[u32]) -> Result<f64, CtcError> {
    check(p, label)?;
    let ext = extended(label);
    let s_len = ext.len();
    let mut alpha = vec![f64::NEG_INFINITY; s_len];
    let mut next = vec![f64::NEG_INFINITY; s_len];
    alpha[0] = p.get(0, BLANK as usize);
    if s_len > 1 {
        alpha[1] = p.get(0, ext[1] as usize);
    }
    for t in 1..p.rows() {
        let row = p.row(t);
        for s in 0..s_len {
            let mut acc = alpha[s];
            if s >= 1 {
                acc = lse2(acc, alpha[s - 1]);
            }
            if can_skip(&ext, s) {
                acc = lse2(acc, alpha[s - 2]);
            }
            next[s] = if acc == f64::NEG_INFINITY {
                acc
            } else {
                acc + row[ext[s] as usize]
            };
        }
        std::mem::swap(&mut alpha, &mut next);
    }
    let tail = if s_len > 1 {
        lse2(alpha[s_len - 1], alpha[s_len - 2])
    } else {
        alpha[0]
    };
    Ok(-tail)
}

/// Loss and its gradient with respect to the pre-softmax scores whose
/// log-softmax is `p`. The gradient is row-major like `p`.
pub fn ctc_grad(p: &LogProbMatrix, label: &[u32]) -> Result<(f64, Vec<f64>), CtcError> {
    check(p, label)?;
    let ext = extended(label);
    let (t_len, s_len, cols) = (p.rows(), ext.len(), p.cols());

    // alpha includes the emission at t; beta covers frames after t only
    let mut alpha = vec![f64::NEG_INFINITY; t_len * s_len];
    alpha[0] = p.get(0, BLANK as usize);
    if s_len > 1 {
        alpha[1] = p.get(0, ext[1] as usize);
    }
    for t in 1..t_len {
        let (prev, cur) = alpha.split_at_mut(t * s_len);
        let prev = &prev[(t - 1) * s_len..];
        for s in 0..s_len {
            let mut acc = prev[s];
            if s >= 1 {
                acc = lse2(acc, prev[s - 1]);
            }
            if can_skip(&ext, s) {
                acc = lse2(acc, prev[s - 2]);
            }
            cur[s] = if acc == f64::NEG_INFINITY {
                acc
            } else {
                acc + p.get(t, ext[s] as usize)
            };
        }
    }

    let mut beta = vec![f64::NEG_INFINITY; t_len * s_len];
    let last = (t_len - 1) * s_len;
    beta[last + s_len - 1] = 0.0;
    if s_len > 1 {
        beta[last + s_len - 2] = 0.0;
    }
    for t in (0..t_len - 1).rev() {
        for s in 0..s_len {
            let next = |s2: usize| beta[(t + 1) * s_len + s2] + p.get(t + 1, ext[s2] as usize);
            let mut acc = next(s);
            if s + 1 < s_len {
                acc = lse2(acc, next(s + 1));
            }
            if s + 2 < s_len && can_skip(&ext, s + 2) {
                acc = lse2(acc, next(s + 2));
            }
            beta[t * s_len + s] = acc;
        }
    }

    let tail = alpha[last + s_len - 1];
    let log_lik = if s_len > 1 {
        lse2(tail, alpha[last + s_len - 2])
    } else {
        tail
    };
    let loss = -log_lik;

    let mut grad = vec![0.0; t_len * cols];
    let mut occupancy = vec![f64::NEG_INFINITY; cols];
    for t in 0..t_len {
        occupancy.iter_mut().for_each(|o| *o = f64::NEG_INFINITY);
        for s in 0..s_len {
            let k = ext[s] as usize;
            occupancy[k] = lse2(occupancy[k], alpha[t * s_len + s] + beta[t * s_len + s]);
        }
        for k in 0..cols {
            grad[t * cols + k] = p.get(t, k).exp() - (occupancy[k] - log_lik).exp();
        }
    }
    Ok((loss, grad))
}
