use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{ArrowheadProblem, Block, ProblemError, SparseBlock};

/// Parameters of the random arrowhead generator.
///
/// Every instance has full row rank and a planted primal-dual optimal pair
/// with strict complementarity, so its optimal objective is known.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratorParams {
    pub blocks: usize,
    pub block_rows: usize,
    pub block_cols: usize,
    pub linking_vars: usize,
    pub root_rows: usize,
    /// Rows local to each pair `(i, i+1)`; empty means none.
    pub local_links: Vec<usize>,
    pub global_links: usize,
    pub density: f64,
    pub inequality_fraction: f64,
    pub seed: u64,
}

impl Default for GeneratorParams {
    fn default() -> Self {
        Self {
            blocks: 4,
            block_rows: 4,
            block_cols: 8,
            linking_vars: 2,
            root_rows: 1,
            local_links: Vec::new(),
            global_links: 1,
            density: 0.3,
            inequality_fraction: 0.0,
            seed: 0,
        }
    }
}

impl GeneratorParams {
    pub fn new(blocks: usize, block_rows: usize, block_cols: usize) -> Self {
        Self { blocks, block_rows, block_cols, ..Self::default() }
    }

    pub fn with_uniform_local_links(mut self, per_pair: usize) -> Self {
        self.local_links = vec![per_pair; self.blocks.saturating_sub(1)];
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    fn local_counts(&self) -> Vec<usize> {
        if self.local_links.is_empty() {
            vec![0; self.blocks.saturating_sub(1)]
        } else {
            self.local_links.clone()
        }
    }

    fn check(&self) -> Result<(), ProblemError> {
        let err = |m: String| Err(ProblemError::Generator(m));
        let n = self.blocks;
        if n == 0 {
            return err("need at least one block".into());
        }
        if !self.local_links.is_empty() && self.local_links.len() != n - 1 {
            return err(format!("expected {} local link counts, got {}", n - 1, self.local_links.len()));
        }
        if !(self.density > 0.0 && self.density <= 1.0) {
            return err(format!("density {} outside (0, 1]", self.density));
        }
        if !(0.0..=1.0).contains(&self.inequality_fraction) {
            return err(format!("inequality fraction {} outside [0, 1]", self.inequality_fraction));
        }
        let x0_private = if n < 3 { self.global_links } else { 0 };
        if self.root_rows + x0_private > self.linking_vars {
            return err(format!(
                "{} linking variables cannot hold {} root pivots and {} global-link columns",
                self.linking_vars, self.root_rows, x0_private
            ));
        }
        let locals = self.local_counts();
        for i in 1..=n {
            let private = private_count(i, n, &locals, self.global_links);
            if self.block_rows + private > self.block_cols {
                return err(format!(
                    "block {i} needs {} pivot and {} private columns but has only {}",
                    self.block_rows, private, self.block_cols
                ));
            }
            let touched = (i > 1 && locals[i - 2] > 0) || (n >= 3 && self.global_links > 0 && (i == 1 || i == n));
            if touched && self.block_cols == private {
                return err(format!("block {i} has no column free for linking entries"));
            }
        }
        Ok(())
    }
}

fn private_count(i: usize, n: usize, locals: &[usize], globals: usize) -> usize {
    let local = if i < n { locals[i - 1] } else { 0 };
    local + global_privates(i, n, globals)
}

fn global_privates(i: usize, n: usize, globals: usize) -> usize {
    if n < 3 {
        return 0;
    }
    (0..globals).filter(|g| 1 + g % n == i).count()
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlantedSolution {
    pub x: Vec<Vec<f64>>,
    pub objective: f64,
}

#[derive(Debug, Clone)]
pub struct Generated {
    pub problem: ArrowheadProblem,
    pub planted: PlantedSolution,
}

#[derive(Default)]
struct Row {
    /// `(block, col, value)`; block 0 addresses `x_0`.
    entries: Vec<(usize, usize, f64)>,
    ineq: bool,
}

struct Columns {
    /// Non-private columns per block (pivots plus free ones).
    open: Vec<Vec<usize>>,
}

fn coef(rng: &mut ChaCha8Rng) -> f64 {
    let mag = rng.gen_range(0.1..1.0);
    if rng.gen::<bool>() { mag } else { -mag }
}

fn pivot(rng: &mut ChaCha8Rng) -> f64 {
    let mag = rng.gen_range(1.0..2.0);
    if rng.gen::<bool>() { mag } else { -mag }
}

/// Adds random entries on `cols` with probability `p`; forces one if `force` and none were drawn.
fn scatter(rng: &mut ChaCha8Rng, row: &mut Row, block: usize, cols: &[usize], p: f64, force: bool) {
    let before = row.entries.len();
    for &c in cols {
        if rng.gen::<f64>() < p {
            row.entries.push((block, c, coef(rng)));
        }
    }
    if force && row.entries.len() == before && !cols.is_empty() {
        let c = cols[rng.gen_range(0..cols.len())];
        row.entries.push((block, c, coef(rng)));
    }
}

/// Generates a random arrowhead LP together with its planted optimum.
///
/// Rows are built in a triangular order: every row owns a pivot column that
/// no earlier row touches, which gives full row rank. Local links own a
/// column in their first block; global links own one in a rotating block
/// (or in `x_0` when there are fewer than three blocks).
pub fn generate(params: &GeneratorParams) -> Result<Generated, ProblemError> {
    params.check()?;
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let n = params.blocks;
    let (m, nc, n0, m0, mg) = (params.block_rows, params.block_cols, params.linking_vars, params.root_rows, params.global_links);
    let rho = params.density;
    let locals = params.local_counts();

    let x0_free = m0 + if n < 3 { mg } else { 0 };
    let mut open = vec![(0..m0).chain(x0_free..n0).collect::<Vec<_>>()];
    let mut next_private = vec![0; n + 1];
    for i in 1..=n {
        let first_free = m + private_count(i, n, &locals, mg);
        open.push((0..m).chain(first_free..nc).collect());
        next_private[i] = m;
    }
    next_private[0] = m0;
    let cols = Columns { open };

    let ineq_draw = |rng: &mut ChaCha8Rng| rng.gen::<f64>() < params.inequality_fraction;

    // root rows
    let mut block_rows: Vec<Vec<Row>> = (0..=n).map(|_| Vec::new()).collect();
    for r in 0..m0 {
        let mut row = Row { ineq: ineq_draw(&mut rng), ..Row::default() };
        let earlier: Vec<usize> = (0..r).chain(x0_free..n0).collect();
        scatter(&mut rng, &mut row, 0, &earlier, rho, false);
        row.entries.push((0, r, pivot(&mut rng)));
        block_rows[0].push(row);
    }
    // diagonal block rows
    for i in 1..=n {
        let free: Vec<usize> = cols.open[i][m..].to_vec();
        for r in 0..m {
            let mut row = Row { ineq: ineq_draw(&mut rng), ..Row::default() };
            scatter(&mut rng, &mut row, 0, &cols.open[0], rho * 0.5, false);
            let earlier: Vec<usize> = (0..r).chain(free.iter().copied()).collect();
            scatter(&mut rng, &mut row, i, &earlier, rho, false);
            row.entries.push((i, r, pivot(&mut rng)));
            block_rows[i].push(row);
        }
    }
    // linking rows: locals grouped by pair, then globals
    let mut link_rows: Vec<Row> = Vec::new();
    for p in 1..n {
        for _ in 0..locals[p - 1] {
            let mut row = Row { ineq: ineq_draw(&mut rng), ..Row::default() };
            scatter(&mut rng, &mut row, 0, &cols.open[0], rho * 0.5, false);
            scatter(&mut rng, &mut row, p, &cols.open[p], rho, false);
            scatter(&mut rng, &mut row, p + 1, &cols.open[p + 1], rho, true);
            row.entries.push((p, next_private[p], pivot(&mut rng)));
            next_private[p] += 1;
            link_rows.push(row);
        }
    }
    for g in 0..mg {
        let mut row = Row { ineq: ineq_draw(&mut rng), ..Row::default() };
        if n >= 3 {
            let home = 1 + g % n;
            scatter(&mut rng, &mut row, 0, &cols.open[0], rho * 0.5, false);
            for i in 1..=n {
                let far = i == 1 || i == n;
                let p = if far { rho } else { rho * 0.25 };
                scatter(&mut rng, &mut row, i, &cols.open[i], p, far);
            }
            row.entries.push((home, next_private[home], pivot(&mut rng)));
            next_private[home] += 1;
        } else {
            scatter(&mut rng, &mut row, 0, &cols.open[0], rho, false);
            row.entries.push((0, next_private[0], pivot(&mut rng)));
            next_private[0] += 1;
        }
        link_rows.push(row);
    }

    // make sure no column is structurally empty
    let mut used: Vec<Vec<bool>> = (0..=n).map(|i| vec![false; if i == 0 { n0 } else { nc }]).collect();
    for row in block_rows.iter().flatten().chain(&link_rows) {
        for &(b, c, _) in &row.entries {
            used[b][c] = true;
        }
    }
    for i in 0..=n {
        for c in 0..used[i].len() {
            if used[i][c] {
                continue;
            }
            // free columns only; all pivots and privates are used
            let owner = if i == 0 {
                let candidates: Vec<usize> = (0..=n).filter(|&k| !block_rows[k].is_empty()).collect();
                if candidates.is_empty() {
                    None
                } else {
                    Some(candidates[rng.gen_range(0..candidates.len())])
                }
            } else if block_rows[i].is_empty() {
                None
            } else {
                Some(i)
            };
            if let Some(k) = owner {
                let r = rng.gen_range(0..block_rows[k].len());
                block_rows[k][r].entries.push((i, c, coef(&mut rng)));
            } else if !link_rows.is_empty() && (i == 0 || n == 1) {
                let r = rng.gen_range(0..link_rows.len());
                link_rows[r].entries.push((i, c, coef(&mut rng)));
            }
        }
    }

    // planted primal point, bounds and bound duals
    let mut blocks: Vec<Block> = Vec::with_capacity(n + 1);
    let mut x: Vec<Vec<f64>> = Vec::with_capacity(n + 1);
    let mut zl: Vec<Vec<f64>> = Vec::with_capacity(n + 1);
    let mut zu: Vec<Vec<f64>> = Vec::with_capacity(n + 1);
    let link_eq = link_rows.iter().filter(|r| !r.ineq).count();
    let link_ineq = link_rows.len() - link_eq;
    for i in 0..=n {
        let nvar = if i == 0 { n0 } else { nc };
        let meq = block_rows[i].iter().filter(|r| !r.ineq).count();
        let mineq = block_rows[i].len() - meq;
        let mut b = Block::empty(i, nvar, meq, mineq, n0, link_eq, link_ineq);
        let (mut xi, mut zli, mut zui) = (vec![0.0; nvar], vec![0.0; nvar], vec![0.0; nvar]);
        for j in 0..nvar {
            let (l, u, v, a, c) = plant_variable(&mut rng);
            b.lower[j] = l;
            b.upper[j] = u;
            xi[j] = v;
            zli[j] = a;
            zui[j] = c;
        }
        blocks.push(b);
        x.push(xi);
        zl.push(zli);
        zu.push(zui);
    }

    // distribute row entries into the coefficient blocks
    for i in 0..=n {
        let (mut ke, mut ki) = (0, 0);
        let mut a = Vec::new();
        let mut bb = Vec::new();
        let mut c = Vec::new();
        let mut d = Vec::new();
        for row in &block_rows[i] {
            let k = if row.ineq { ki } else { ke };
            for &(blk, col, v) in &row.entries {
                let target = match (row.ineq, blk == 0) {
                    (false, true) => &mut a,
                    (false, false) => &mut bb,
                    (true, true) => &mut c,
                    (true, false) => &mut d,
                };
                target.push((k, col, v));
            }
            if row.ineq { ki += 1 } else { ke += 1 }
        }
        let blk = &mut blocks[i];
        blk.a = SparseBlock::from_entries(blk.a.rows, blk.a.cols, a);
        blk.c = SparseBlock::from_entries(blk.c.rows, blk.c.cols, c);
        if i > 0 {
            blk.b = SparseBlock::from_entries(blk.b.rows, blk.b.cols, bb);
            blk.d = SparseBlock::from_entries(blk.d.rows, blk.d.cols, d);
        }
    }
    let (mut fe, mut ge): (Vec<Vec<_>>, Vec<Vec<_>>) = ((0..=n).map(|_| Vec::new()).collect(), (0..=n).map(|_| Vec::new()).collect());
    let (mut ke, mut ki) = (0, 0);
    for row in &link_rows {
        for &(blk, col, v) in &row.entries {
            if row.ineq { ge[blk].push((ki, col, v)) } else { fe[blk].push((ke, col, v)) }
        }
        if row.ineq { ki += 1 } else { ke += 1 }
    }
    for i in 0..=n {
        let blk = &mut blocks[i];
        blk.f = SparseBlock::from_entries(link_eq, blk.nvar(), std::mem::take(&mut fe[i]));
        blk.g = SparseBlock::from_entries(link_ineq, blk.nvar(), std::mem::take(&mut ge[i]));
    }

    let mut problem = ArrowheadProblem {
        blocks,
        link_rhs_eq: vec![0.0; link_eq],
        link_lower: vec![0.0; link_ineq],
        link_upper: vec![0.0; link_ineq],
    };

    // right-hand sides and row duals
    let (eq_act, link_eq_act) = problem.eq_activity(&x);
    let (in_act, link_in_act) = problem.ineq_activity(&x);
    let mut y: Vec<Vec<f64>> = Vec::with_capacity(n + 1);
    let mut w: Vec<Vec<f64>> = Vec::with_capacity(n + 1);
    for i in 0..=n {
        problem.blocks[i].rhs_eq = eq_act[i].clone();
        y.push((0..eq_act[i].len()).map(|_| rng.gen_range(-1.0..1.0)).collect());
        let mut wi = Vec::with_capacity(in_act[i].len());
        for (r, &v) in in_act[i].iter().enumerate() {
            let (d, f, dual) = plant_range(&mut rng, v);
            problem.blocks[i].ineq_lower[r] = d;
            problem.blocks[i].ineq_upper[r] = f;
            wi.push(dual);
        }
        w.push(wi);
    }
    problem.link_rhs_eq = link_eq_act;
    let y_link: Vec<f64> = (0..link_eq).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let mut w_link = Vec::with_capacity(link_ineq);
    for (r, &v) in link_in_act.iter().enumerate() {
        let (d, f, dual) = plant_range(&mut rng, v);
        problem.link_lower[r] = d;
        problem.link_upper[r] = f;
        w_link.push(dual);
    }

    // dual feasibility fixes the cost vector
    let aty = problem.transpose_activity(&y, &y_link, &w, &w_link);
    for i in 0..=n {
        for j in 0..problem.blocks[i].nvar() {
            problem.blocks[i].obj[j] = aty[i][j] + zl[i][j] - zu[i][j];
        }
    }
    let objective = problem.objective(&x);
    debug_assert!(problem.validate().is_ok(), "{:?}", problem.validate());
    Ok(Generated { problem, planted: PlantedSolution { x, objective } })
}

/// Bounds, value and bound duals of one variable.
fn plant_variable(rng: &mut ChaCha8Rng) -> (f64, f64, f64, f64, f64) {
    let inf = f64::INFINITY;
    let kind = rng.gen::<f64>();
    let (l, u) = if kind < 0.55 {
        let l = rng.gen_range(-1.0..1.0);
        (l, l + rng.gen_range(0.5..3.0))
    } else if kind < 0.85 {
        (rng.gen_range(-1.0..1.0), inf)
    } else if kind < 0.95 {
        (-inf, rng.gen_range(-1.0..1.0))
    } else {
        (-inf, inf)
    };
    let status = rng.gen::<f64>();
    let dual = rng.gen_range(0.5..2.0);
    if l.is_finite() && status < 0.35 {
        (l, u, l, dual, 0.0)
    } else if u.is_finite() && status > 0.65 {
        (l, u, u, 0.0, dual)
    } else {
        let v = match (l.is_finite(), u.is_finite()) {
            (true, true) => l + rng.gen_range(0.2..0.8) * (u - l),
            (true, false) => l + rng.gen_range(0.2..2.0),
            (false, true) => u - rng.gen_range(0.2..2.0),
            (false, false) => rng.gen_range(-2.0..2.0),
        };
        (l, u, v, 0.0, 0.0)
    }
}

/// Range around an inequality activity `v`, plus its planted dual.
fn plant_range(rng: &mut ChaCha8Rng, v: f64) -> (f64, f64, f64) {
    let inf = f64::INFINITY;
    let open = |rng: &mut ChaCha8Rng| rng.gen::<f64>() < 0.3;
    let status = rng.gen::<f64>();
    if status < 1.0 / 3.0 {
        let f = if open(rng) { inf } else { v + rng.gen_range(0.5..2.0) };
        (v, f, rng.gen_range(0.5..2.0))
    } else if status < 2.0 / 3.0 {
        let d = if open(rng) { -inf } else { v - rng.gen_range(0.5..2.0) };
        (d, v, -rng.gen_range(0.5..2.0))
    } else {
        let d = if open(rng) { -inf } else { v - rng.gen_range(0.2..2.0) };
        let f = if d.is_infinite() || !open(rng) { v + rng.gen_range(0.2..2.0) } else { inf };
        (d, f, 0.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problem::{classify_problem, to_standard_form};

    fn params(n: usize) -> GeneratorParams {
        GeneratorParams {
            blocks: n,
            block_rows: 3,
            block_cols: 7,
            linking_vars: 3,
            root_rows: 1,
            local_links: vec![1; n - 1],
            global_links: 2,
            density: 0.4,
            inequality_fraction: 0.0,
            seed: 7,
        }
    }

    #[test]
    fn same_seed_same_instance() {
        let a = generate(&params(4)).unwrap();
        let b = generate(&params(4)).unwrap();
        assert_eq!(a.problem, b.problem);
        assert_eq!(a.planted, b.planted);
        let c = generate(&params(4).with_seed(8)).unwrap();
        assert_ne!(a.problem, c.problem);
    }

    #[test]
    fn planted_point_is_feasible() {
        for n in [1, 2, 3, 5] {
            let mut p = params(n);
            p.inequality_fraction = 0.3;
            if n < 3 {
                p.linking_vars = 4;
            }
            let g = generate(&p).unwrap();
            assert!(g.problem.validate().is_ok());
            let (eq, link) = g.problem.eq_activity(&g.planted.x);
            for (i, rows) in eq.iter().enumerate() {
                for (r, v) in rows.iter().enumerate() {
                    assert!((v - g.problem.blocks[i].rhs_eq[r]).abs() < 1e-12);
                }
            }
            for (r, v) in link.iter().enumerate() {
                assert!((v - g.problem.link_rhs_eq[r]).abs() < 1e-12);
            }
            let (ineq, _) = g.problem.ineq_activity(&g.planted.x);
            for (i, rows) in ineq.iter().enumerate() {
                for (r, v) in rows.iter().enumerate() {
                    assert!(*v >= g.problem.blocks[i].ineq_lower[r] - 1e-12);
                    assert!(*v <= g.problem.blocks[i].ineq_upper[r] + 1e-12);
                }
            }
        }
    }

    #[test]
    fn classification_recovers_requested_links() {
        for n in [3, 4, 6] {
            let mut p = params(n);
            p.local_links = (0..n - 1).map(|k| k % 3).collect();
            p.global_links = 3;
            let g = generate(&p).unwrap();
            let c = classify_problem(&g.problem);
            assert_eq!(c.local_counts, p.local_links);
            assert_eq!(c.global_count, 3);
        }
    }

    #[test]
    fn standard_form_keeps_classification() {
        let mut p = params(4);
        p.inequality_fraction = 0.5;
        let g = generate(&p).unwrap();
        let s = to_standard_form(&g.problem).unwrap();
        let c = classify_problem(&s.problem);
        assert_eq!(c.local_counts, vec![1, 1, 1]);
        assert_eq!(c.global_count, 2);
    }

    #[test]
    fn budget_violations_rejected() {
        let mut p = params(4);
        p.block_cols = 3;
        assert!(generate(&p).is_err());
        let mut p = params(2);
        p.linking_vars = 2;
        p.global_links = 2;
        assert!(generate(&p).is_err());
    }
}
