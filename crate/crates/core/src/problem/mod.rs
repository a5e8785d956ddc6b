//! Arrowhead (doubly-bordered block-diagonal) linear programs.
//!
//! Block `0` carries the linking variables `x_0` and its own rows
//! `A_0 x_0 = b_0`, `d_0 <= C_0 x_0 <= f_0`. Every diagonal block `i >= 1`
//! couples to `x_0` through `A_i`/`C_i` and owns `B_i`/`D_i`. The linking
//! rows `F_0 x_0 + sum F_i x_i = b_{N+1}` and their inequality analogue `G`
//! form the row border.

mod classify;
mod generate;
pub mod io;
mod merge;
mod standard;

use thiserror::Error;

pub use classify::{classify_links, classify_problem, label_for_support, LinkClassification, LinkLabel};
pub use generate::{generate, Generated, GeneratorParams, PlantedSolution};
pub use merge::merge_blocks;
pub use standard::{to_standard_form, RowOrigin, SlackInfo, StandardArrowhead, StandardMap};

#[derive(Debug, Error)]
pub enum ProblemError {
    #[error("problem is not well-formed ({} violation(s)); first: {}", .0.violations.len(), .0.violations.first().map(|v| v.to_string()).unwrap_or_default())]
    Invalid(ValidationReport),
    #[error("inequality row {row} of {owner} is free (both sides infinite)")]
    FreeRow { owner: String, row: usize },
    #[error("invalid generator parameters: {0}")]
    Generator(String),
    #[error("merge factor must be at least 1")]
    MergeFactor,
}

/// Sparse coefficient block in coordinate form, 0-based indices.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SparseBlock {
    pub rows: usize,
    pub cols: usize,
    pub entries: Vec<(usize, usize, f64)>,
}

impl SparseBlock {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, entries: Vec::new() }
    }

    /// Builds a block and sorts its entries by `(row, col)`.
    pub fn from_entries(rows: usize, cols: usize, entries: Vec<(usize, usize, f64)>) -> Self {
        let mut block = Self { rows, cols, entries };
        block.canonicalize();
        block
    }

    pub fn canonicalize(&mut self) {
        self.entries.sort_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));
    }

    pub fn nnz(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// `y += M x`
    pub fn mul_add(&self, x: &[f64], y: &mut [f64]) {
        for &(r, c, v) in &self.entries {
            y[r] += v * x[c];
        }
    }

    /// `y += M^T x`
    pub fn mul_t_add(&self, x: &[f64], y: &mut [f64]) {
        for &(r, c, v) in &self.entries {
            y[c] += v * x[r];
        }
    }

    /// Whether each row holds at least one entry.
    pub fn row_has_entries(&self) -> Vec<bool> {
        let mut has = vec![false; self.rows];
        for &(r, _, _) in &self.entries {
            if r < self.rows {
                has[r] = true;
            }
        }
        has
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let mut d = vec![vec![0.0; self.cols]; self.rows];
        for &(r, c, v) in &self.entries {
            d[r][c] += v;
        }
        d
    }
}

/// One block of the arrowhead LP. For block 0, `a`/`c` act on `x_0` itself
/// and `b`/`d` stay empty.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Block {
    pub obj: Vec<f64>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub rhs_eq: Vec<f64>,
    pub ineq_lower: Vec<f64>,
    pub ineq_upper: Vec<f64>,
    pub a: SparseBlock,
    pub b: SparseBlock,
    pub c: SparseBlock,
    pub d: SparseBlock,
    pub f: SparseBlock,
    pub g: SparseBlock,
}

impl Block {
    /// An all-zero block with free variables and the given dimensions.
    /// `n0` is the linking-variable count, `link_eq`/`link_ineq` the linking row counts.
    pub fn empty(index: usize, nvar: usize, meq: usize, mineq: usize, n0: usize, link_eq: usize, link_ineq: usize) -> Self {
        let (own_a, own_b) = if index == 0 { (nvar, 0) } else { (n0, nvar) };
        Self {
            obj: vec![0.0; nvar],
            lower: vec![f64::NEG_INFINITY; nvar],
            upper: vec![f64::INFINITY; nvar],
            rhs_eq: vec![0.0; meq],
            ineq_lower: vec![0.0; mineq],
            ineq_upper: vec![0.0; mineq],
            a: SparseBlock::zeros(meq, own_a),
            b: SparseBlock::zeros(if index == 0 { 0 } else { meq }, own_b),
            c: SparseBlock::zeros(mineq, own_a),
            d: SparseBlock::zeros(if index == 0 { 0 } else { mineq }, own_b),
            f: SparseBlock::zeros(link_eq, nvar),
            g: SparseBlock::zeros(link_ineq, nvar),
        }
    }

    pub fn nvar(&self) -> usize {
        self.obj.len()
    }

    pub fn meq(&self) -> usize {
        self.rhs_eq.len()
    }

    pub fn mineq(&self) -> usize {
        self.ineq_lower.len()
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ArrowheadProblem {
    /// `blocks[0]` is the linking block, `blocks[1..=N]` the diagonal blocks.
    pub blocks: Vec<Block>,
    pub link_rhs_eq: Vec<f64>,
    pub link_lower: Vec<f64>,
    pub link_upper: Vec<f64>,
}

impl ArrowheadProblem {
    pub fn num_blocks(&self) -> usize {
        self.blocks.len().saturating_sub(1)
    }

    pub fn n0(&self) -> usize {
        self.blocks.first().map_or(0, Block::nvar)
    }

    pub fn link_meq(&self) -> usize {
        self.link_rhs_eq.len()
    }

    pub fn link_mineq(&self) -> usize {
        self.link_lower.len()
    }

    pub fn total_vars(&self) -> usize {
        self.blocks.iter().map(Block::nvar).sum()
    }

    pub fn total_eq_rows(&self) -> usize {
        self.blocks.iter().map(Block::meq).sum::<usize>() + self.link_meq()
    }

    pub fn has_inequalities(&self) -> bool {
        self.link_mineq() > 0 || self.blocks.iter().any(|b| b.mineq() > 0)
    }

    /// `c^T x` for per-block primal values.
    pub fn objective(&self, x: &[Vec<f64>]) -> f64 {
        self.blocks
            .iter()
            .zip(x)
            .map(|(b, xi)| b.obj.iter().zip(xi).map(|(c, v)| c * v).sum::<f64>())
            .sum()
    }

    /// Equality-row activities: per block `A_i x_0 + B_i x_i`, then linking `F x`.
    pub fn eq_activity(&self, x: &[Vec<f64>]) -> (Vec<Vec<f64>>, Vec<f64>) {
        let mut rows: Vec<Vec<f64>> = self.blocks.iter().map(|b| vec![0.0; b.meq()]).collect();
        let mut link = vec![0.0; self.link_meq()];
        for (i, b) in self.blocks.iter().enumerate() {
            b.a.mul_add(&x[0], &mut rows[i]);
            if i > 0 {
                b.b.mul_add(&x[i], &mut rows[i]);
            }
            b.f.mul_add(&x[i], &mut link);
        }
        (rows, link)
    }

    /// Inequality-row activities: per block `C_i x_0 + D_i x_i`, then linking `G x`.
    pub fn ineq_activity(&self, x: &[Vec<f64>]) -> (Vec<Vec<f64>>, Vec<f64>) {
        let mut rows: Vec<Vec<f64>> = self.blocks.iter().map(|b| vec![0.0; b.mineq()]).collect();
        let mut link = vec![0.0; self.link_mineq()];
        for (i, b) in self.blocks.iter().enumerate() {
            b.c.mul_add(&x[0], &mut rows[i]);
            if i > 0 {
                b.d.mul_add(&x[i], &mut rows[i]);
            }
            b.g.mul_add(&x[i], &mut link);
        }
        (rows, link)
    }

    /// Transposed products: `sum` over equality and inequality rows of
    /// `row^T * dual`, accumulated into per-block primal space.
    pub fn transpose_activity(
        &self,
        eq: &[Vec<f64>],
        link_eq: &[f64],
        ineq: &[Vec<f64>],
        link_ineq: &[f64],
    ) -> Vec<Vec<f64>> {
        let mut out: Vec<Vec<f64>> = self.blocks.iter().map(|b| vec![0.0; b.nvar()]).collect();
        for (i, b) in self.blocks.iter().enumerate() {
            let (head, tail) = out.split_at_mut(1);
            let x0 = &mut head[0];
            b.a.mul_t_add(&eq[i], x0);
            b.c.mul_t_add(&ineq[i], x0);
            let xi = if i == 0 { x0 } else { &mut tail[i - 1] };
            if i > 0 {
                b.b.mul_t_add(&eq[i], xi);
                b.d.mul_t_add(&ineq[i], xi);
            }
            b.f.mul_t_add(link_eq, xi);
            b.g.mul_t_add(link_ineq, xi);
        }
        out
    }

    pub fn validate(&self) -> ValidationReport {
        validate(self)
    }
}

/// Where a violation was found: a block index or the linking section.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Location {
    Problem,
    Block(usize),
    Link,
}

impl std::fmt::Display for Location {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Location::Problem => write!(f, "problem"),
            Location::Block(i) => write!(f, "block {i}"),
            Location::Link => write!(f, "linking rows"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Violation {
    pub location: Location,
    pub field: String,
    pub message: String,
}

impl std::fmt::Display for Violation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{} {}: {}", self.location, self.field, self.message)
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_ok(&self) -> bool {
        self.violations.is_empty()
    }

    fn push(&mut self, location: Location, field: &str, message: String) {
        self.violations.push(Violation { location, field: field.to_string(), message });
    }
}

/// Checks every structural invariant and collects all violations.
pub fn validate(p: &ArrowheadProblem) -> ValidationReport {
    let mut rep = ValidationReport::default();
    if p.blocks.len() < 2 {
        rep.push(Location::Problem, "N", format!("need at least one diagonal block, got {}", p.num_blocks()));
        if p.blocks.is_empty() {
            return rep;
        }
    }
    let n0 = p.n0();
    let (lm, lmi) = (p.link_meq(), p.link_mineq());
    if p.link_upper.len() != lmi {
        rep.push(Location::Link, "RANGE_INEQ", format!("{} lower vs {} upper range values", lmi, p.link_upper.len()));
    }
    check_vector(&mut rep, Location::Link, "RHS_EQ", &p.link_rhs_eq);
    check_ranges(&mut rep, Location::Link, "RANGE_INEQ", &p.link_lower, &p.link_upper);

    for (i, b) in p.blocks.iter().enumerate() {
        let loc = Location::Block(i);
        let n = b.nvar();
        if b.lower.len() != n || b.upper.len() != n {
            rep.push(loc, "LB/UB", format!("bound lengths {}/{} differ from NVAR={n}", b.lower.len(), b.upper.len()));
        }
        if b.ineq_upper.len() != b.mineq() {
            rep.push(loc, "RANGE_INEQ", format!("{} lower vs {} upper range values", b.mineq(), b.ineq_upper.len()));
        }
        check_vector(&mut rep, loc, "OBJ", &b.obj);
        check_vector(&mut rep, loc, "RHS_EQ", &b.rhs_eq);
        for (j, (&l, &u)) in b.lower.iter().zip(&b.upper).enumerate() {
            if l.is_nan() || u.is_nan() || l == f64::INFINITY || u == f64::NEG_INFINITY {
                rep.push(loc, "LB/UB", format!("variable {j} has invalid bounds [{l}, {u}]"));
            } else if l > u {
                rep.push(loc, "LB/UB", format!("variable {j} has lower bound {l} above upper bound {u}"));
            }
        }
        check_ranges(&mut rep, loc, "RANGE_INEQ", &b.ineq_lower, &b.ineq_upper);

        let own_cols = if i == 0 { n0 } else { n };
        check_matrix(&mut rep, loc, "A", &b.a, b.meq(), n0);
        check_matrix(&mut rep, loc, "C", &b.c, b.mineq(), n0);
        if i == 0 {
            if !b.b.is_empty() {
                rep.push(loc, "B", "block 0 has no B matrix".into());
            }
            if !b.d.is_empty() {
                rep.push(loc, "D", "block 0 has no D matrix".into());
            }
        } else {
            check_matrix(&mut rep, loc, "B", &b.b, b.meq(), own_cols);
            check_matrix(&mut rep, loc, "D", &b.d, b.mineq(), own_cols);
        }
        check_matrix(&mut rep, loc, "F", &b.f, lm, n);
        check_matrix(&mut rep, loc, "G", &b.g, lmi, n);
    }
    rep
}

fn check_vector(rep: &mut ValidationReport, loc: Location, field: &str, v: &[f64]) {
    if let Some(j) = v.iter().position(|x| !x.is_finite()) {
        rep.push(loc, field, format!("entry {j} is not finite ({})", v[j]));
    }
}

fn check_ranges(rep: &mut ValidationReport, loc: Location, field: &str, lo: &[f64], hi: &[f64]) {
    for (j, (&d, &f)) in lo.iter().zip(hi).enumerate() {
        if d.is_nan() || f.is_nan() || d == f64::INFINITY || f == f64::NEG_INFINITY {
            rep.push(loc, field, format!("row {j} has invalid range [{d}, {f}]"));
        } else if d > f {
            rep.push(loc, field, format!("row {j} has lower side {d} above upper side {f}"));
        }
    }
}

fn check_matrix(rep: &mut ValidationReport, loc: Location, name: &str, m: &SparseBlock, rows: usize, cols: usize) {
    if m.rows != rows || m.cols != cols {
        rep.push(loc, name, format!("declared {}x{} but expected {rows}x{cols}", m.rows, m.cols));
    }
    let mut seen = std::collections::HashSet::new();
    for &(r, c, v) in &m.entries {
        if r >= m.rows || c >= m.cols || r >= rows || c >= cols {
            rep.push(loc, name, format!("entry ({r},{c}) outside {}x{} dimension", rows.min(m.rows), cols.min(m.cols)));
        }
        if !v.is_finite() || v == 0.0 {
            rep.push(loc, name, format!("entry ({r},{c}) has invalid coefficient {v}"));
        }
        if !seen.insert((r, c)) {
            rep.push(loc, name, format!("duplicate entry ({r},{c})"));
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_block() -> ArrowheadProblem {
        let mut blocks = vec![Block::empty(0, 1, 0, 0, 1, 1, 0)];
        for i in 1..=2 {
            let mut b = Block::empty(i, 2, 1, 0, 1, 1, 0);
            b.b = SparseBlock::from_entries(1, 2, vec![(0, 0, 1.0), (0, 1, 1.0)]);
            b.rhs_eq = vec![1.0];
            b.lower = vec![0.0; 2];
            b.f = SparseBlock::from_entries(1, 2, vec![(0, 0, 1.0)]);
            blocks.push(b);
        }
        ArrowheadProblem { blocks, link_rhs_eq: vec![1.0], link_lower: vec![], link_upper: vec![] }
    }

    #[test]
    fn well_formed_problem_has_empty_report() {
        assert!(validate(&two_block()).is_ok());
    }

    #[test]
    fn out_of_range_entry_cites_block() {
        let mut p = two_block();
        p.blocks[1].b = SparseBlock { rows: 1, cols: 2, entries: vec![(0, 5, 1.0)] };
        let rep = validate(&p);
        assert!(rep.violations.iter().any(|v| v.location == Location::Block(1) && v.field == "B"));
    }

    #[test]
    fn declared_shape_mismatch_is_reported() {
        let mut p = two_block();
        p.blocks[1].b = SparseBlock { rows: 3, cols: 3, entries: vec![(0, 2, 1.0)] };
        let rep = validate(&p);
        assert!(rep.violations.iter().any(|v| v.location == Location::Block(1) && v.message.contains("declared 3x3")));
    }

    #[test]
    fn crossed_bounds_are_reported() {
        let mut p = two_block();
        p.blocks[0].lower = vec![1.0];
        p.blocks[0].upper = vec![0.0];
        let rep = validate(&p);
        assert_eq!(rep.violations.len(), 1);
        assert_eq!(rep.violations[0].location, Location::Block(0));
        assert!(rep.violations[0].message.contains("above upper"));
    }

    #[test]
    fn duplicates_and_zero_coefficients_are_reported() {
        let mut p = two_block();
        p.blocks[2].f.entries.push((0, 0, 2.0));
        p.blocks[2].b.entries.push((0, 1, 0.0));
        let rep = validate(&p);
        assert!(rep.violations.iter().any(|v| v.message.contains("duplicate")));
        assert!(rep.violations.iter().any(|v| v.message.contains("invalid coefficient")));
    }

    #[test]
    fn zero_blocks_rejected() {
        let p = ArrowheadProblem { blocks: vec![Block::empty(0, 0, 0, 0, 0, 0, 0)], ..Default::default() };
        assert!(!validate(&p).is_ok());
    }
}
