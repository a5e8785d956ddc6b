use super::{classify::label_for_support, ArrowheadProblem, Block, LinkLabel, ProblemError, SparseBlock};

/// Equality rows that produced a slack column.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RowOrigin {
    Block { block: usize, row: usize },
    Link { row: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SlackInfo {
    pub origin: RowOrigin,
    /// Block receiving the slack column and its index there.
    pub block: usize,
    pub column: usize,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct StandardMap {
    pub original_nvar: Vec<usize>,
    pub slacks: Vec<SlackInfo>,
}

/// An arrowhead LP with only equality rows and bounds. The linking rows are
/// the original equality rows followed by the converted inequality rows.
#[derive(Debug, Clone, PartialEq)]
pub struct StandardArrowhead {
    pub problem: ArrowheadProblem,
    pub map: StandardMap,
}

impl StandardArrowhead {
    pub fn num_blocks(&self) -> usize {
        self.problem.num_blocks()
    }

    pub fn nvar(&self, i: usize) -> usize {
        self.problem.blocks[i].nvar()
    }

    pub fn meq(&self, i: usize) -> usize {
        self.problem.blocks[i].meq()
    }

    pub fn link_rows(&self) -> usize {
        self.problem.link_meq()
    }

    /// Offsets of `x_0, x_1, .., x_N` in the flat primal vector.
    pub fn x_offsets(&self) -> Vec<usize> {
        prefix(self.problem.blocks.iter().map(Block::nvar))
    }

    /// Offsets of `y_0, y_1, .., y_N, y_L` in the flat dual vector.
    pub fn y_offsets(&self) -> Vec<usize> {
        prefix(self.problem.blocks.iter().map(Block::meq).chain(std::iter::once(self.link_rows())))
    }

    pub fn flat_obj(&self) -> Vec<f64> {
        self.problem.blocks.iter().flat_map(|b| b.obj.iter().copied()).collect()
    }

    pub fn flat_lower(&self) -> Vec<f64> {
        self.problem.blocks.iter().flat_map(|b| b.lower.iter().copied()).collect()
    }

    pub fn flat_upper(&self) -> Vec<f64> {
        self.problem.blocks.iter().flat_map(|b| b.upper.iter().copied()).collect()
    }

    pub fn flat_rhs(&self) -> Vec<f64> {
        let mut b: Vec<f64> = self.problem.blocks.iter().flat_map(|b| b.rhs_eq.iter().copied()).collect();
        b.extend_from_slice(&self.problem.link_rhs_eq);
        b
    }

    pub fn split_x(&self, x: &[f64]) -> Vec<Vec<f64>> {
        let off = self.x_offsets();
        off.windows(2).map(|w| x[w[0]..w[1]].to_vec()).collect()
    }

    /// `A x` in the flat layout.
    pub fn mul(&self, x: &[f64]) -> Vec<f64> {
        let (rows, link) = self.problem.eq_activity(&self.split_x(x));
        let mut out: Vec<f64> = rows.into_iter().flatten().collect();
        out.extend(link);
        out
    }

    /// `A^T y` in the flat layout.
    pub fn mul_t(&self, y: &[f64]) -> Vec<f64> {
        let off = self.y_offsets();
        let nb = self.problem.blocks.len();
        let eq: Vec<Vec<f64>> = (0..nb).map(|i| y[off[i]..off[i + 1]].to_vec()).collect();
        let link = &y[off[nb]..off[nb + 1]];
        let ineq: Vec<Vec<f64>> = vec![Vec::new(); nb];
        self.problem.transpose_activity(&eq, link, &ineq, &[]).into_iter().flatten().collect()
    }

    /// The coefficient matrix as sorted `(row, col, value)` triplets in the flat layout.
    pub fn triplets(&self) -> Vec<(usize, usize, f64)> {
        let xo = self.x_offsets();
        let yo = self.y_offsets();
        let nb = self.problem.blocks.len();
        let mut t = Vec::new();
        for (i, b) in self.problem.blocks.iter().enumerate() {
            t.extend(b.a.entries.iter().map(|&(r, c, v)| (yo[i] + r, xo[0] + c, v)));
            if i > 0 {
                t.extend(b.b.entries.iter().map(|&(r, c, v)| (yo[i] + r, xo[i] + c, v)));
            }
            t.extend(b.f.entries.iter().map(|&(r, c, v)| (yo[nb] + r, xo[i] + c, v)));
        }
        t.sort_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));
        t
    }

    /// Drops slack columns, returning the original per-block primal values.
    pub fn recover(&self, x: &[Vec<f64>]) -> Vec<Vec<f64>> {
        x.iter().zip(&self.map.original_nvar).map(|(xi, &n)| xi[..n].to_vec()).collect()
    }

    /// Extends an original primal point with the slack values it implies.
    pub fn lift(&self, original: &ArrowheadProblem, x: &[Vec<f64>]) -> Vec<Vec<f64>> {
        let (rows, link) = original.ineq_activity(x);
        let mut out: Vec<Vec<f64>> =
            self.problem.blocks.iter().zip(x).map(|(b, xi)| {
                let mut v = xi.clone();
                v.resize(b.nvar(), 0.0);
                v
            }).collect();
        for s in &self.map.slacks {
            out[s.block][s.column] = match s.origin {
                RowOrigin::Block { block, row } => rows[block][row],
                RowOrigin::Link { row } => link[row],
            };
        }
        out
    }
}

fn prefix(sizes: impl Iterator<Item = usize>) -> Vec<usize> {
    let mut off = vec![0];
    for s in sizes {
        off.push(off.last().unwrap() + s);
    }
    off
}

fn widen(m: &SparseBlock, rows: usize, cols: usize) -> SparseBlock {
    SparseBlock { rows, cols, entries: m.entries.clone() }
}

/// Converts every inequality row into an equality with a bounded slack.
///
/// A block row's slack joins that block (`x_0` for block 0); a linking row
/// local to `(i, i+1)` places its slack in block `i`; a global linking row
/// places it in `x_0`.
pub fn to_standard_form(p: &ArrowheadProblem) -> Result<StandardArrowhead, ProblemError> {
    let report = p.validate();
    if !report.is_ok() {
        return Err(ProblemError::Invalid(report));
    }
    for (i, b) in p.blocks.iter().enumerate() {
        for (r, (&d, &f)) in b.ineq_lower.iter().zip(&b.ineq_upper).enumerate() {
            if d == f64::NEG_INFINITY && f == f64::INFINITY {
                return Err(ProblemError::FreeRow { owner: format!("block {i}"), row: r });
            }
        }
    }
    for (r, (&d, &f)) in p.link_lower.iter().zip(&p.link_upper).enumerate() {
        if d == f64::NEG_INFINITY && f == f64::INFINITY {
            return Err(ProblemError::FreeRow { owner: "linking rows".into(), row: r });
        }
    }

    let n = p.num_blocks();
    let nb = n + 1;
    let (lme, lmi) = (p.link_meq(), p.link_mineq());

    // slack destination for each linking inequality row
    let mut g_support: Vec<Vec<usize>> = vec![Vec::new(); lmi];
    for i in 1..=n {
        for &(r, _, _) in &p.blocks[i].g.entries {
            if g_support[r].last() != Some(&i) {
                g_support[r].push(i);
            }
        }
    }
    let g_dest: Vec<usize> = g_support
        .iter()
        .map(|s| match label_for_support(s, n) {
            LinkLabel::Local(i) => i,
            LinkLabel::Global => 0,
        })
        .collect();

    let mut map = StandardMap { original_nvar: p.blocks.iter().map(Block::nvar).collect(), slacks: Vec::new() };
    let mut new_n: Vec<usize> = map.original_nvar.clone();
    let mut block_slack_col: Vec<Vec<usize>> = Vec::with_capacity(nb);
    for (i, b) in p.blocks.iter().enumerate() {
        let cols: Vec<usize> = (0..b.mineq()).map(|k| new_n[i] + k).collect();
        for (row, &column) in cols.iter().enumerate() {
            map.slacks.push(SlackInfo { origin: RowOrigin::Block { block: i, row }, block: i, column });
        }
        new_n[i] += b.mineq();
        block_slack_col.push(cols);
    }
    let mut link_slack_col = vec![0; lmi];
    for (row, &dest) in g_dest.iter().enumerate() {
        link_slack_col[row] = new_n[dest];
        map.slacks.push(SlackInfo { origin: RowOrigin::Link { row }, block: dest, column: new_n[dest] });
        new_n[dest] += 1;
    }
    let n0 = new_n[0];
    let link_rows = lme + lmi;

    let mut blocks = Vec::with_capacity(nb);
    for (i, b) in p.blocks.iter().enumerate() {
        let nv = new_n[i];
        let (me, mi) = (b.meq(), b.mineq());
        let mut obj = b.obj.clone();
        obj.resize(nv, 0.0);
        let mut lower = b.lower.clone();
        let mut upper = b.upper.clone();
        lower.extend_from_slice(&b.ineq_lower);
        upper.extend_from_slice(&b.ineq_upper);
        for (row, &dest) in g_dest.iter().enumerate() {
            if dest == i {
                lower.push(p.link_lower[row]);
                upper.push(p.link_upper[row]);
            }
        }
        let mut rhs_eq = b.rhs_eq.clone();
        rhs_eq.resize(me + mi, 0.0);

        let rows = me + mi;
        // rows acting on x_0
        let mut a = widen(&b.a, rows, n0);
        a.entries.extend(b.c.entries.iter().map(|&(r, c, v)| (me + r, c, v)));
        let mut bb = SparseBlock::zeros(0, 0);
        if i > 0 {
            bb = widen(&b.b, rows, nv);
            bb.entries.extend(b.d.entries.iter().map(|&(r, c, v)| (me + r, c, v)));
        }
        let own = if i == 0 { &mut a } else { &mut bb };
        for (r, &col) in block_slack_col[i].iter().enumerate() {
            own.entries.push((me + r, col, -1.0));
        }

        let mut f = widen(&b.f, link_rows, nv);
        f.entries.extend(b.g.entries.iter().map(|&(r, c, v)| (lme + r, c, v)));
        for (row, &dest) in g_dest.iter().enumerate() {
            if dest == i {
                f.entries.push((lme + row, link_slack_col[row], -1.0));
            }
        }
        a.canonicalize();
        bb.canonicalize();
        f.canonicalize();
        blocks.push(Block {
            obj,
            lower,
            upper,
            rhs_eq,
            ineq_lower: Vec::new(),
            ineq_upper: Vec::new(),
            a,
            b: bb,
            c: SparseBlock::zeros(0, n0),
            d: SparseBlock::zeros(0, if i == 0 { 0 } else { nv }),
            f,
            g: SparseBlock::zeros(0, nv),
        });
    }
    let mut link_rhs_eq = p.link_rhs_eq.clone();
    link_rhs_eq.resize(link_rows, 0.0);
    let problem = ArrowheadProblem { blocks, link_rhs_eq, link_lower: Vec::new(), link_upper: Vec::new() };
    debug_assert!(problem.validate().is_ok(), "{:?}", problem.validate());
    Ok(StandardArrowhead { problem, map })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn with_inequalities() -> ArrowheadProblem {
        // N = 3, x_0 in R^1, each block x_i in R^2
        let mut blocks = vec![Block::empty(0, 1, 0, 1, 1, 0, 2)];
        blocks[0].c = SparseBlock::from_entries(1, 1, vec![(0, 0, 1.0)]);
        blocks[0].ineq_lower = vec![-1.0];
        blocks[0].ineq_upper = vec![f64::INFINITY];
        for i in 1..=3 {
            let mut b = Block::empty(i, 2, 1, 1, 1, 0, 2);
            b.b = SparseBlock::from_entries(1, 2, vec![(0, 0, 1.0), (0, 1, 2.0)]);
            b.d = SparseBlock::from_entries(1, 2, vec![(0, 1, 1.0)]);
            b.c = SparseBlock::from_entries(1, 1, vec![(0, 0, 3.0)]);
            b.ineq_lower = vec![0.0];
            b.ineq_upper = vec![4.0];
            blocks.push(b);
        }
        // row 0 couples blocks 2,3 (local to pair 2); row 1 couples 1 and 3 (global)
        blocks[2].g = SparseBlock::from_entries(2, 2, vec![(0, 0, 1.0)]);
        blocks[3].g = SparseBlock::from_entries(2, 2, vec![(0, 1, 1.0), (1, 0, 1.0)]);
        blocks[1].g = SparseBlock::from_entries(2, 2, vec![(1, 1, 1.0)]);
        ArrowheadProblem {
            blocks,
            link_rhs_eq: vec![],
            link_lower: vec![f64::NEG_INFINITY, 0.0],
            link_upper: vec![1.0, 2.0],
        }
    }

    #[test]
    fn slacks_land_in_expected_blocks() {
        let s = to_standard_form(&with_inequalities()).unwrap();
        // x_0: original + own slack + global link slack
        assert_eq!(s.nvar(0), 3);
        // block 2 receives its own slack plus the local link slack
        assert_eq!(s.nvar(1), 3);
        assert_eq!(s.nvar(2), 4);
        assert_eq!(s.nvar(3), 3);
        assert_eq!(s.link_rows(), 2);
        assert!(!s.problem.has_inequalities());
        let link: Vec<_> = s.map.slacks.iter().filter(|x| matches!(x.origin, RowOrigin::Link { .. })).collect();
        assert_eq!(link[0].block, 2);
        assert_eq!(link[1].block, 0);
    }

    #[test]
    fn lifted_point_is_feasible_and_recovers() {
        let p = with_inequalities();
        let s = to_standard_form(&p).unwrap();
        let x = vec![vec![0.5], vec![1.0, 0.25], vec![0.0, 1.0], vec![2.0, -1.0]];
        let lifted = s.lift(&p, &x);
        let (rows, link) = s.problem.eq_activity(&lifted);
        for (i, r) in rows.iter().enumerate() {
            let (orig, _) = p.eq_activity(&x);
            assert_eq!(&r[..orig[i].len()], &orig[i][..]);
            assert!(r[orig[i].len()..].iter().all(|v| v.abs() < 1e-15));
        }
        assert!(link.iter().all(|v| v.abs() < 1e-15));
        assert_eq!(s.recover(&lifted), x);
    }

    #[test]
    fn free_row_rejected() {
        let mut p = with_inequalities();
        p.blocks[1].ineq_lower = vec![f64::NEG_INFINITY];
        p.blocks[1].ineq_upper = vec![f64::INFINITY];
        assert!(matches!(to_standard_form(&p), Err(ProblemError::FreeRow { .. })));
    }

    #[test]
    fn flat_products_are_adjoint() {
        let s = to_standard_form(&with_inequalities()).unwrap();
        let nx = *s.x_offsets().last().unwrap();
        let ny = *s.y_offsets().last().unwrap();
        let x: Vec<f64> = (0..nx).map(|k| (k as f64 * 0.37).sin()).collect();
        let y: Vec<f64> = (0..ny).map(|k| (k as f64 * 0.91).cos()).collect();
        let ax = s.mul(&x);
        let aty = s.mul_t(&y);
        let lhs: f64 = ax.iter().zip(&y).map(|(a, b)| a * b).sum();
        let rhs: f64 = aty.iter().zip(&x).map(|(a, b)| a * b).sum();
        assert!((lhs - rhs).abs() < 1e-12);
        let mut dense = vec![0.0; ny];
        for (r, c, v) in s.triplets() {
            dense[r] += v * x[c];
        }
        assert_eq!(dense, ax);
    }
}
