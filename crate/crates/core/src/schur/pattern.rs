use std::collections::HashMap;
use std::ops::Range;

use thiserror::Error;

use crate::linalg::{DenseMatrix, SymTriplets};
use crate::runtime::{CommError, Reducible};

/// Contributions outside the predicted pattern up to this magnitude are
/// dropped (and counted); larger ones are an error.
pub const PATTERN_DROP_TOL: f64 = 1e-12;

/// Row groups of a Schur-complement border.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum BorderGroup {
    /// Rows local to pair `(p, p+1)`.
    Pair(usize),
    Global,
    X0,
    Y0,
}

#[derive(Debug, Error, Clone, PartialEq)]
#[error("contribution {value:e} at ({row}, {col}) lies outside the predicted pattern")]
pub struct PatternViolation {
    pub row: usize,
    pub col: usize,
    pub value: f64,
}

/// Predicted lower-triangle support of a Schur complement over a border
/// made of consecutive groups.
///
/// Contribution support: pair groups at neighbouring positions couple, pairs
/// couple with global rows and `x_0`, and global rows and `x_0` are dense.
/// The full support adds the diagonal and the `x_0`/`y_0` coupling.
#[derive(Debug, Clone, PartialEq)]
pub struct SchurPattern {
    dim: usize,
    groups: Vec<(BorderGroup, Range<usize>)>,
    /// lower-triangle `(row, col)` pairs, sorted by `(col, row)`
    entries: Vec<(usize, usize)>,
    in_contribution: Vec<bool>,
    index: HashMap<(usize, usize), usize>,
}

fn couples(a: (BorderGroup, usize), b: (BorderGroup, usize)) -> bool {
    use BorderGroup::*;
    match (a.0, b.0) {
        (Pair(_), Pair(_)) => a.1.abs_diff(b.1) <= 1,
        (Pair(_), Global | X0) | (Global | X0, Pair(_)) => true,
        (Global | X0, Global | X0) => true,
        _ => false,
    }
}

impl SchurPattern {
    /// Builds the pattern from groups given in border order with their sizes.
    pub fn new(groups: &[(BorderGroup, usize)]) -> Self {
        let mut ranges = Vec::with_capacity(groups.len());
        let mut off = 0;
        for &(g, s) in groups {
            ranges.push((g, off..off + s));
            off += s;
        }
        // position of each pair group among the pair groups
        let mut pair_pos = Vec::with_capacity(groups.len());
        let mut k = 0;
        for &(g, _) in groups {
            pair_pos.push(k);
            if matches!(g, BorderGroup::Pair(_)) {
                k += 1;
            }
        }
        let mut entries = Vec::new();
        let mut in_contribution = Vec::new();
        for (gc, (cg, cr)) in ranges.iter().enumerate() {
            for col in cr.clone() {
                for (gr, (rg, rr)) in ranges.iter().enumerate().skip(gc) {
                    let contrib = couples((*rg, pair_pos[gr]), (*cg, pair_pos[gc]));
                    let full = contrib || matches!((rg, cg), (BorderGroup::Y0, BorderGroup::X0));
                    for row in rr.clone() {
                        if row < col {
                            continue;
                        }
                        if full || row == col {
                            entries.push((row, col));
                            in_contribution.push(contrib);
                        }
                    }
                }
            }
        }
        let index = entries.iter().enumerate().map(|(k, &e)| (e, k)).collect();
        Self { dim: off, groups: ranges, entries, in_contribution, index }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn groups(&self) -> &[(BorderGroup, Range<usize>)] {
        &self.groups
    }

    pub fn entries(&self) -> &[(usize, usize)] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn position(&self, row: usize, col: usize) -> Option<usize> {
        let key = if row >= col { (row, col) } else { (col, row) };
        self.index.get(&key).copied()
    }

    pub fn contains(&self, row: usize, col: usize) -> bool {
        self.position(row, col).is_some()
    }

    pub fn in_contribution(&self, row: usize, col: usize) -> bool {
        self.position(row, col).is_some_and(|k| self.in_contribution[k])
    }

    /// Entries of the full symmetric matrix covered by the contribution support.
    pub fn contribution_count(&self) -> usize {
        self.entries
            .iter()
            .zip(&self.in_contribution)
            .filter(|(_, &c)| c)
            .map(|(&(r, c), _)| if r == c { 1 } else { 2 })
            .sum()
    }

    /// Fraction of the full symmetric matrix covered by the pattern.
    pub fn density(&self) -> f64 {
        if self.dim == 0 {
            return 1.0;
        }
        let full: usize = self.entries.iter().map(|&(r, c)| if r == c { 1 } else { 2 }).sum();
        full as f64 / (self.dim * self.dim) as f64
    }

    /// Lower-triangle adjacency of the full pattern.
    pub fn adjacency(&self) -> Vec<Vec<usize>> {
        let mut adj = vec![Vec::new(); self.dim];
        for &(r, c) in &self.entries {
            if r != c {
                adj[r].push(c);
                adj[c].push(r);
            }
        }
        adj
    }

    pub fn zeros(&self) -> PatternValues {
        PatternValues { values: vec![0.0; self.entries.len()], dropped: 0 }
    }

    /// Adds `v` at `(row, col)`, enforcing the pattern.
    pub fn accumulate(&self, acc: &mut PatternValues, row: usize, col: usize, v: f64) -> Result<(), PatternViolation> {
        match self.position(row, col) {
            Some(k) => {
                acc.values[k] += v;
                Ok(())
            }
            None if v.abs() <= PATTERN_DROP_TOL => {
                acc.dropped += 1;
                Ok(())
            }
            None => Err(PatternViolation { row, col, value: v }),
        }
    }

    pub fn to_triplets(&self, values: &PatternValues) -> SymTriplets {
        SymTriplets {
            n: self.dim,
            entries: self.entries.iter().zip(&values.values).map(|(&(r, c), &v)| (r, c, v)).collect(),
        }
    }

    pub fn to_dense(&self, values: &PatternValues) -> DenseMatrix {
        let mut d = DenseMatrix::zeros(self.dim, self.dim);
        for (&(r, c), &v) in self.entries.iter().zip(&values.values) {
            d.set(r, c, v);
            d.set(c, r, v);
        }
        d
    }
}

/// Values on a [`SchurPattern`], summed elementwise by reductions.
#[derive(Debug, Clone, PartialEq)]
pub struct PatternValues {
    pub values: Vec<f64>,
    /// Out-of-pattern entries dropped as numerically zero.
    pub dropped: usize,
}

impl PatternValues {
    /// Entries of the full symmetric matrix that are nonzero.
    pub fn nnz(&self, pattern: &SchurPattern) -> usize {
        pattern
            .entries
            .iter()
            .zip(&self.values)
            .filter(|(_, &v)| v != 0.0)
            .map(|(&(r, c), _)| if r == c { 1 } else { 2 })
            .sum()
    }
}

impl Reducible for PatternValues {
    fn combine(&mut self, other: &Self) -> Result<(), CommError> {
        if self.values.len() != other.values.len() {
            return Err(CommError::Shape(format!("pattern sizes {} and {}", self.values.len(), other.values.len())));
        }
        for (a, b) in self.values.iter_mut().zip(&other.values) {
            *a += b;
        }
        self.dropped += other.dropped;
        Ok(())
    }
}

/// Upper bound on the nonzeros of the summed border contributions:
/// `sum l_i^2 + 2 sum l_i l_{i+1} + 2 sum l_i (m_F + n_0) + (m_F + n_0)^2`.
pub fn observation_bound(local: &[usize], m_global: usize, n0: usize) -> usize {
    let w = m_global + n0;
    let s: usize = local.iter().sum();
    band_bound(local) + 2 * s * w + w * w
}

/// Nonzero bound of a block-tridiagonal matrix with the given diagonal block sizes.
pub fn band_bound(sizes: &[usize]) -> usize {
    let sq: usize = sizes.iter().map(|l| l * l).sum();
    let off: usize = sizes.windows(2).map(|w| w[0] * w[1]).sum();
    sq + 2 * off
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bound_examples() {
        assert_eq!(observation_bound(&[1, 1], 0, 0), 4);
        assert_eq!(observation_bound(&[2, 2, 2], 1, 1), 56);
        assert_eq!(band_bound(&[]), 0);
    }

    #[test]
    fn pattern_size_equals_bound() {
        let l = [2, 0, 3, 1];
        let mut groups: Vec<(BorderGroup, usize)> = l.iter().enumerate().map(|(k, &s)| (BorderGroup::Pair(k + 1), s)).collect();
        groups.push((BorderGroup::Global, 2));
        groups.push((BorderGroup::X0, 3));
        groups.push((BorderGroup::Y0, 1));
        let p = SchurPattern::new(&groups);
        assert_eq!(p.contribution_count(), observation_bound(&l, 2, 3));
        // pairs two positions apart do not couple
        assert!(!p.contains(2, 0));
        assert!(p.contains(5, 2));
        // y0 couples with x0 and itself only
        let y0 = p.dim() - 1;
        assert!(p.contains(y0, y0 - 1));
        assert!(!p.in_contribution(y0, y0 - 1));
        assert!(!p.contains(y0, 0));
    }

    #[test]
    fn accumulate_enforces_pattern() {
        let p = SchurPattern::new(&[(BorderGroup::Pair(1), 1), (BorderGroup::Pair(2), 1), (BorderGroup::Pair(3), 1)]);
        let mut v = p.zeros();
        p.accumulate(&mut v, 1, 0, 2.0).unwrap();
        p.accumulate(&mut v, 0, 2, 1e-14).unwrap();
        assert_eq!(v.dropped, 1);
        assert!(p.accumulate(&mut v, 2, 0, 1.0).is_err());
        assert_eq!(v.nnz(&p), 2);
    }
}
