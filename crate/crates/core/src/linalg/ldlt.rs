use std::collections::BTreeMap;

use super::{minimum_degree, LinalgError, SymTriplets};

/// Threshold for accepting a 1x1 pivot against the column maximum.
const PIVOT_THRESHOLD: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Inertia {
    pub positive: usize,
    pub negative: usize,
    pub zero: usize,
}

#[derive(Debug, Clone)]
enum Pivot {
    One { p: usize, d: f64, l: Vec<(usize, f64)> },
    Two { p: usize, r: usize, d: [f64; 3], l: Vec<(usize, f64, f64)> },
}

/// Sparse symmetric-indefinite `L D L^T` factorization with 1x1 and 2x2
/// pivots. Pivots are visited in a minimum-degree order; a threshold test
/// swaps in a better-conditioned pivot or pairs two rows when needed.
#[derive(Debug, Clone)]
pub struct SparseLdlt {
    n: usize,
    steps: Vec<Pivot>,
    inertia: Inertia,
    nnz_l: usize,
}

impl SparseLdlt {
    /// Factors with an ordering computed from the matrix's own pattern.
    pub fn factor(a: &SymTriplets) -> Result<Self, LinalgError> {
        let order = minimum_degree(&a.adjacency());
        Self::factor_with_order(a, &order)
    }

    /// Factors visiting pivots in `order` (a permutation of `0..n`).
    pub fn factor_with_order(a: &SymTriplets, order: &[usize]) -> Result<Self, LinalgError> {
        let n = a.n;
        if order.len() != n {
            return Err(LinalgError::Dimension { expected: n, got: order.len() });
        }
        let mut rows: Vec<BTreeMap<usize, f64>> = vec![BTreeMap::new(); n];
        for &(r, c, v) in &a.entries {
            *rows[r].entry(c).or_insert(0.0) += v;
            if r != c {
                *rows[c].entry(r).or_insert(0.0) += v;
            }
        }
        let mut done = vec![false; n];
        let mut steps = Vec::with_capacity(n);
        let mut inertia = Inertia::default();
        let mut nnz_l = 0;
        let mut cursor = 0;
        while cursor < n {
            let p = order[cursor];
            if done[p] {
                cursor += 1;
                continue;
            }
            let app = rows[p].get(&p).copied().unwrap_or(0.0);
            let (colmax_p, r) = off_diag_max(&rows[p], p);
            if !app.is_finite() || !colmax_p.is_finite() {
                return Err(LinalgError::Singular { pivot: p });
            }
            let choice = if colmax_p == 0.0 {
                if app == 0.0 {
                    return Err(LinalgError::Singular { pivot: p });
                }
                Choice::One(p)
            } else if app.abs() >= PIVOT_THRESHOLD * colmax_p {
                Choice::One(p)
            } else {
                let (colmax_r, _) = off_diag_max(&rows[r], r);
                let arr = rows[r].get(&r).copied().unwrap_or(0.0);
                if app.abs() * colmax_r >= PIVOT_THRESHOLD * colmax_p * colmax_p {
                    Choice::One(p)
                } else if arr.abs() >= PIVOT_THRESHOLD * colmax_r {
                    Choice::One(r)
                } else {
                    Choice::Two(p, r)
                }
            };
            match choice {
                Choice::One(q) => {
                    let d = rows[q].get(&q).copied().unwrap_or(0.0);
                    if d == 0.0 || !d.is_finite() {
                        return Err(LinalgError::Singular { pivot: q });
                    }
                    let col: Vec<(usize, f64)> = rows[q].iter().filter(|(&j, _)| j != q).map(|(&j, &v)| (j, v)).collect();
                    let l: Vec<(usize, f64)> = col.iter().map(|&(j, v)| (j, v / d)).collect();
                    for &(i, _) in &l {
                        rows[i].remove(&q);
                    }
                    for &(i, li) in &l {
                        for &(j, aj) in &col {
                            if j <= i {
                                let upd = li * aj;
                                *rows[i].entry(j).or_insert(0.0) -= upd;
                                if j != i {
                                    *rows[j].entry(i).or_insert(0.0) -= upd;
                                }
                            }
                        }
                    }
                    rows[q].clear();
                    done[q] = true;
                    if d > 0.0 { inertia.positive += 1 } else { inertia.negative += 1 }
                    nnz_l += l.len();
                    steps.push(Pivot::One { p: q, d, l });
                }
                Choice::Two(p, r) => {
                    let d11 = app;
                    let d21 = rows[p].get(&r).copied().unwrap_or(0.0);
                    let d22 = rows[r].get(&r).copied().unwrap_or(0.0);
                    let det = d11 * d22 - d21 * d21;
                    if det == 0.0 || !det.is_finite() {
                        return Err(LinalgError::Singular { pivot: p });
                    }
                    let mut others: BTreeMap<usize, (f64, f64)> = BTreeMap::new();
                    for (&j, &v) in &rows[p] {
                        if j != p && j != r {
                            others.entry(j).or_insert((0.0, 0.0)).0 = v;
                        }
                    }
                    for (&j, &v) in &rows[r] {
                        if j != p && j != r {
                            others.entry(j).or_insert((0.0, 0.0)).1 = v;
                        }
                    }
                    let cols: Vec<(usize, f64, f64)> = others.into_iter().map(|(j, (a, b))| (j, a, b)).collect();
                    // [l_ip l_ir] = [a_ip a_ir] D^{-1}
                    let l: Vec<(usize, f64, f64)> = cols
                        .iter()
                        .map(|&(j, a, b)| (j, (a * d22 - b * d21) / det, (b * d11 - a * d21) / det))
                        .collect();
                    for &(i, _, _) in &l {
                        rows[i].remove(&p);
                        rows[i].remove(&r);
                    }
                    for &(i, lp, lr) in &l {
                        for &(j, ap, ar) in &cols {
                            if j <= i {
                                let upd = lp * ap + lr * ar;
                                *rows[i].entry(j).or_insert(0.0) -= upd;
                                if j != i {
                                    *rows[j].entry(i).or_insert(0.0) -= upd;
                                }
                            }
                        }
                    }
                    rows[p].clear();
                    rows[r].clear();
                    done[p] = true;
                    done[r] = true;
                    if det < 0.0 {
                        inertia.positive += 1;
                        inertia.negative += 1;
                    } else if d11 + d22 > 0.0 {
                        inertia.positive += 2;
                    } else {
                        inertia.negative += 2;
                    }
                    nnz_l += 2 * l.len();
                    steps.push(Pivot::Two { p, r, d: [d11, d21, d22], l });
                }
            }
        }
        Ok(Self { n, steps, inertia, nnz_l })
    }

    pub fn order(&self) -> usize {
        self.n
    }

    pub fn inertia(&self) -> Inertia {
        self.inertia
    }

    pub fn nnz_l(&self) -> usize {
        self.nnz_l
    }

    pub fn two_by_two_pivots(&self) -> usize {
        self.steps.iter().filter(|s| matches!(s, Pivot::Two { .. })).count()
    }

    /// Solves `A x = b` in place.
    pub fn solve_in_place(&self, x: &mut [f64]) {
        debug_assert_eq!(x.len(), self.n);
        for s in &self.steps {
            match s {
                Pivot::One { p, l, .. } => {
                    let xp = x[*p];
                    if xp != 0.0 {
                        for &(i, li) in l {
                            x[i] -= li * xp;
                        }
                    }
                }
                Pivot::Two { p, r, l, .. } => {
                    let (xp, xr) = (x[*p], x[*r]);
                    for &(i, lp, lr) in l {
                        x[i] -= lp * xp + lr * xr;
                    }
                }
            }
        }
        for s in &self.steps {
            match s {
                Pivot::One { p, d, .. } => x[*p] /= d,
                Pivot::Two { p, r, d: [d11, d21, d22], .. } => {
                    let det = d11 * d22 - d21 * d21;
                    let (a, b) = (x[*p], x[*r]);
                    x[*p] = (d22 * a - d21 * b) / det;
                    x[*r] = (d11 * b - d21 * a) / det;
                }
            }
        }
        for s in self.steps.iter().rev() {
            match s {
                Pivot::One { p, l, .. } => {
                    let mut acc = x[*p];
                    for &(i, li) in l {
                        acc -= li * x[i];
                    }
                    x[*p] = acc;
                }
                Pivot::Two { p, r, l, .. } => {
                    let (mut ap, mut ar) = (x[*p], x[*r]);
                    for &(i, lp, lr) in l {
                        ap -= lp * x[i];
                        ar -= lr * x[i];
                    }
                    x[*p] = ap;
                    x[*r] = ar;
                }
            }
        }
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let mut x = b.to_vec();
        self.solve_in_place(&mut x);
        x
    }

    /// Solves for several right-hand sides; each column is processed exactly
    /// as a single solve would, so results match bitwise.
    pub fn solve_multi(&self, cols: &mut [Vec<f64>]) {
        for c in cols {
            self.solve_in_place(c);
        }
    }
}

enum Choice {
    One(usize),
    Two(usize, usize),
}

fn off_diag_max(row: &BTreeMap<usize, f64>, p: usize) -> (f64, usize) {
    let mut best = (0.0, p);
    for (&j, &v) in row {
        if j != p && (v.abs() > best.0 || v.is_nan()) {
            best = (if v.is_nan() { f64::NAN } else { v.abs() }, j);
            if v.is_nan() {
                break;
            }
        }
    }
    best
}
