//! Edit distance and character error rate with symbol equivalence classes.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum EvalError {
    #[error("{refs} references but {hyps} hypotheses")]
    LengthMismatch { refs: usize, hyps: usize },
    #[error("references are empty, CER is undefined")]
    EmptyReference,
    #[error("symbol {0} appears in more than one equivalence class")]
    Overlap(u32),
}

/// Partition of symbol ids. Ids not listed form singleton classes, so the
/// default map is the identity.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "EquivalenceDoc", into = "EquivalenceDoc")]
pub struct EquivalenceMap {
    classes: Vec<Vec<u32>>,
    representative: BTreeMap<u32, u32>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct EquivalenceDoc {
    classes: Vec<Vec<u32>>,
}

impl TryFrom<EquivalenceDoc> for EquivalenceMap {
    type Error = EvalError;
    fn try_from(doc: EquivalenceDoc) -> Result<Self, EvalError> {
        EquivalenceMap::new(doc.classes)
    }
}

impl From<EquivalenceMap> for EquivalenceDoc {
    fn from(m: EquivalenceMap) -> Self {
        EquivalenceDoc { classes: m.classes }
    }
}

impl EquivalenceMap {
    pub fn identity() -> EquivalenceMap {
        EquivalenceMap::default()
    }

    pub fn new(classes: Vec<Vec<u32>>) -> Result<EquivalenceMap, EvalError> {
        let mut representative = BTreeMap::new();
        for class in &classes {
            let Some(&rep) = class.iter().min() else { continue };
            for &id in class {
                if representative.insert(id, rep).is_some() {
                    return Err(EvalError::Overlap(id));
                }
            }
        }
        Ok(EquivalenceMap { classes, representative })
    }

    pub fn classes(&self) -> &[Vec<u32>] {
        &self.classes
    }

    /// Smallest id of the class containing `id`.
    pub fn class_of(&self, id: u32) -> u32 {
        self.representative.get(&id).copied().unwrap_or(id)
    }

    pub fn equivalent(&self, a: u32, b: u32) -> bool {
        self.class_of(a) == self.class_of(b)
    }
}

/// Levenshtein distance with unit costs, comparing symbols by class.
pub fn edit_distance(reference: &[u32], hypothesis: &[u32], eq: &EquivalenceMap) -> usize {
    let r: Vec<u32> = reference.iter().map(|&s| eq.class_of(s)).collect();
    let h: Vec<u32> = hypothesis.iter().map(|&s| eq.class_of(s)).collect();
    let mut prev: Vec<usize> = (0..=h.len()).collect();
    let mut cur = vec![0; h.len() + 1];
    for i in 1..=r.len() {
        cur[0] = i;
        for j in 1..=h.len() {
            let sub = prev[j - 1] + usize::from(r[i - 1] != h[j - 1]);
            cur[j] = sub.min(prev[j] + 1).min(cur[j - 1] + 1);
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[h.len()]
}

/// Total edit distance over total reference length.
pub fn cer(refs: &[Vec<u32>], hyps: &[Vec<u32>], eq: &EquivalenceMap) -> Result<f64, EvalError> {
    if refs.len() != hyps.len() {
        return Err(EvalError::LengthMismatch {
            refs: refs.len(),
            hyps: hyps.len(),
        });
    }
    let total: usize = refs.iter().map(Vec::len).sum();
    if total == 0 {
        return Err(EvalError::EmptyReference);
    }
    let errors: usize = refs.iter().zip(hyps).map(|(r, h)| edit_distance(r, h, eq)).sum();
    Ok(errors as f64 / total as f64)
}

/// Unicode code points of `text`, the symbol ids used for plain-text scoring.
pub fn codepoints(text: &str) -> Vec<u32> {
    text.chars().map(u32::from).collect()
}
