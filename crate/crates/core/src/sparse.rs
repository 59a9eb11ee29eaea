//! Sparse feature vectors shared by the text and visual pipelines.

use serde::{Deserialize, Serialize};

/// A sparse vector of `(column, weight)` entries over a fixed dimension.
///
/// Entries are kept sorted by strictly increasing column id and never hold
/// explicit zeros.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SparseVector {
    entries: Vec<(usize, f64)>,
    dim: usize,
}

impl SparseVector {
    /// Builds a vector from unsorted `(column, weight)` pairs. Zero weights
    /// are dropped, duplicate columns are summed.
    pub fn from_pairs(pairs: impl IntoIterator<Item = (usize, f64)>, dim: usize) -> Self {
        let mut entries: Vec<(usize, f64)> = pairs.into_iter().collect();
        entries.sort_by_key(|&(c, _)| c);
        let mut merged: Vec<(usize, f64)> = Vec::with_capacity(entries.len());
        for (c, w) in entries {
            assert!(c < dim, "column {c} out of bounds for dim {dim}");
            match merged.last_mut() {
                Some((lc, lw)) if *lc == c => *lw += w,
                _ => merged.push((c, w)),
            }
        }
        merged.retain(|&(_, w)| w != 0.0);
        SparseVector {
            entries: merged,
            dim,
        }
    }

    pub fn zero(dim: usize) -> Self {
        SparseVector {
            entries: Vec::new(),
            dim,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn entries(&self) -> &[(usize, f64)] {
        &self.entries
    }

    pub fn nnz(&self) -> usize {
        self.entries.len()
    }

    pub fn is_zero(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, col: usize) -> f64 {
        match self.entries.binary_search_by_key(&col, |&(c, _)| c) {
            Ok(i) => self.entries[i].1,
            Err(_) => 0.0,
        }
    }

    pub fn norm(&self) -> f64 {
        self.entries
            .iter()
            .map(|&(_, w)| w * w)
            .sum::<f64>()
            .sqrt()
    }

    /// Divides every entry by the Euclidean norm. A zero vector stays zero.
    pub fn l2_normalized(&self) -> Self {
        let n = self.norm();
        if n == 0.0 {
            return self.clone();
        }
        SparseVector {
            entries: self.entries.iter().map(|&(c, w)| (c, w / n)).collect(),
            dim: self.dim,
        }
    }

    pub fn dot(&self, other: &SparseVector) -> f64 {
        debug_assert_eq!(self.dim, other.dim);
        let mut sum = 0.0;
        let (mut i, mut j) = (0, 0);
        while i < self.entries.len() && j < other.entries.len() {
            let (ca, wa) = self.entries[i];
            let (cb, wb) = other.entries[j];
            match ca.cmp(&cb) {
                std::cmp::Ordering::Less => i += 1,
                std::cmp::Ordering::Greater => j += 1,
                std::cmp::Ordering::Equal => {
                    sum += wa * wb;
                    i += 1;
                    j += 1;
                }
            }
        }
        sum
    }

    pub fn squared_distance(&self, other: &SparseVector) -> f64 {
        // ||a||^2 + ||b||^2 - 2 a.b, clamped against rounding below zero
        let a2 = self.entries.iter().map(|&(_, w)| w * w).sum::<f64>();
        let b2 = other.entries.iter().map(|&(_, w)| w * w).sum::<f64>();
        (a2 + b2 - 2.0 * self.dot(other)).max(0.0)
    }

    pub fn to_dense(&self) -> Vec<f64> {
        let mut v = vec![0.0; self.dim];
        for &(c, w) in &self.entries {
            v[c] = w;
        }
        v
    }

    pub fn from_dense(values: &[f64]) -> Self {
        SparseVector {
            entries: values
                .iter()
                .enumerate()
                .filter(|&(_, &w)| w != 0.0)
                .map(|(c, &w)| (c, w))
                .collect(),
            dim: values.len(),
        }
    }

    /// Textual dump row: `doc_id, col:weight col:weight ...`
    pub fn dump_row(&self, doc_id: &str) -> String {
        let mut s = String::from(doc_id);
        s.push(',');
        for &(c, w) in &self.entries {
            s.push(' ');
            s.push_str(&format!("{c}:{w:.17e}"));
        }
        s
    }

    /// Parses a row produced by [`dump_row`](Self::dump_row).
    pub fn parse_row(line: &str, dim: usize) -> Option<(String, SparseVector)> {
        let (id, rest) = line.split_once(',')?;
        let mut entries = Vec::new();
        for tok in rest.split_whitespace() {
            let (c, w) = tok.split_once(':')?;
            entries.push((c.parse().ok()?, w.parse().ok()?));
        }
        Some((id.to_string(), SparseVector::from_pairs(entries, dim)))
    }
}
