use serde::{Deserialize, Serialize};

use super::Mat;
use crate::error::{Error, Result};

/// Row permutation. Row `i` of `P A` is row `map[i]` of `A`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Perm {
    map: Vec<usize>,
}

impl Perm {
    pub fn identity(n: usize) -> Self {
        Perm {
            map: (0..n).collect(),
        }
    }

    pub fn from_vec(map: Vec<usize>) -> Result<Self> {
        let n = map.len();
        let mut seen = vec![false; n];
        for &m in &map {
            if m >= n || seen[m] {
                return Err(Error::DimensionMismatch(format!("{map:?} is not a permutation")));
            }
            seen[m] = true;
        }
        Ok(Perm { map })
    }

    pub fn len(&self) -> usize {
        self.map.len()
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.map
    }

    pub fn is_identity(&self) -> bool {
        self.map.iter().enumerate().all(|(i, &m)| i == m)
    }

    /// Swaps positions `a` and `b`, mirroring a row swap on `P A`.
    pub fn swap(&mut self, a: usize, b: usize) {
        self.map.swap(a, b);
    }

    /// `P A`
    pub fn apply_rows(&self, a: &Mat) -> Mat {
        assert_eq!(a.rows(), self.len(), "permutation length mismatch");
        Mat::from_fn(a.rows(), a.cols(), |i, j| a[(self.map[i], j)])
    }

    pub fn apply_vec(&self, x: &[f64]) -> Vec<f64> {
        self.map.iter().map(|&m| x[m]).collect()
    }

    pub fn inverse(&self) -> Perm {
        let mut inv = vec![0; self.len()];
        for (i, &m) in self.map.iter().enumerate() {
            inv[m] = i;
        }
        Perm { map: inv }
    }

    /// `self` applied after `first`: `(self ∘ first) A = self (first A)`.
    pub fn compose(&self, first: &Perm) -> Perm {
        assert_eq!(self.len(), first.len());
        Perm {
            map: self.map.iter().map(|&m| first.map[m]).collect(),
        }
    }
}
