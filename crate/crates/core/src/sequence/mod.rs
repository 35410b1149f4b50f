//! Framing, CTC and the toy recurrent recognizer.

pub mod ctc;
pub mod frames;
pub mod model;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use ctc::{collapse, ctc_grad, ctc_loss, decode_best_path, stable_logsumexp, CtcError, LogProbMatrix, BLANK};
pub use frames::{fit_line_height, make_frames, FrameError, FrameSequence};
pub use model::{train_toy, train_toy_with, ModelError, Sample, ToyModel, TrainConfig};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum AlphabetError {
    #[error("alphabet is empty")]
    Empty,
    #[error("symbol id 0 is reserved for the blank")]
    ReservedBlank,
    #[error("symbol id {0} appears twice")]
    Duplicate(u32),
    #[error("symbol id {0} is not in the alphabet")]
    Unknown(u32),
}

/// Ordered symbol ids. Model class `k` (k >= 1) stands for `symbols[k - 1]`;
/// class 0 is the blank.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "Vec<u32>", into = "Vec<u32>")]
pub struct Alphabet {
    symbols: Vec<u32>,
}

impl TryFrom<Vec<u32>> for Alphabet {
    type Error = AlphabetError;
    fn try_from(v: Vec<u32>) -> Result<Self, Self::Error> {
        Alphabet::new(v)
    }
}

impl From<Alphabet> for Vec<u32> {
    fn from(a: Alphabet) -> Self {
        a.symbols
    }
}

impl Alphabet {
    pub fn new(symbols: Vec<u32>) -> Result<Alphabet, AlphabetError> {
        if symbols.is_empty() {
            return Err(AlphabetError::Empty);
        }
        let mut seen = std::collections::HashSet::new();
        for &s in &symbols {
            if s == BLANK {
                return Err(AlphabetError::ReservedBlank);
            }
            if !seen.insert(s) {
                return Err(AlphabetError::Duplicate(s));
            }
        }
        Ok(Alphabet { symbols })
    }

    pub fn symbols(&self) -> &[u32] {
        &self.symbols
    }

    pub fn len(&self) -> usize {
        self.symbols.len()
    }

    pub fn is_empty(&self) -> bool {
        self.symbols.is_empty()
    }

    /// Number of model outputs, blank included.
    pub fn classes(&self) -> usize {
        self.symbols.len() + 1
    }

    pub fn class_of(&self, symbol: u32) -> Result<u32, AlphabetError> {
        self.symbols
            .iter()
            .position(|&s| s == symbol)
            .map(|i| i as u32 + 1)
            .ok_or(AlphabetError::Unknown(symbol))
    }

    pub fn symbol_of(&self, class: u32) -> Option<u32> {
        (class as usize).checked_sub(1).and_then(|i| self.symbols.get(i).copied())
    }

    pub fn encode(&self, label: &[u32]) -> Result<Vec<u32>, AlphabetError> {
        label.iter().map(|&s| self.class_of(s)).collect()
    }

    /// Classes outside the alphabet (including blank) are dropped.
    pub fn decode(&self, classes: &[u32]) -> Vec<u32> {
        classes.iter().filter_map(|&c| self.symbol_of(c)).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn class_mapping_roundtrip() {
        let a = Alphabet::new(vec![5, 3, 9]).unwrap();
        assert_eq!(a.classes(), 4);
        assert_eq!(a.encode(&[9, 5, 5]).unwrap(), vec![3, 1, 1]);
        assert_eq!(a.decode(&[3, 0, 1, 1]), vec![9, 5, 5]);
        assert_eq!(a.class_of(4), Err(AlphabetError::Unknown(4)));
    }

    #[test]
    fn invalid_alphabets() {
        assert_eq!(Alphabet::new(vec![]), Err(AlphabetError::Empty));
        assert_eq!(Alphabet::new(vec![1, 0]), Err(AlphabetError::ReservedBlank));
        assert_eq!(Alphabet::new(vec![2, 2]), Err(AlphabetError::Duplicate(2)));
        assert!(serde_json::from_str::<Alphabet>("[1,1]").is_err());
        let a: Alphabet = serde_json::from_str("[1,2]").unwrap();
        assert_eq!(serde_json::to_string(&a).unwrap(), "[1,2]");
    }
}
