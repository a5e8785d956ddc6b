//! Brute-force references: the augmented system assembled densely straight
//! from the problem data, an LU solve with partial pivoting, and the
//! interior-point method running on top of them.
//!
//! Nothing here goes through the block permutation or the Schur machinery,
//! so agreement with the structured solvers is a real check.

use std::sync::Arc;
use std::time::Instant;

use thiserror::Error;

use crate::ipm::{self, IpmOptions, SolveReport};
use crate::kkt::{with_regularization, KktError, KktSolver, KktStats, Regularization, SolverConfig};
use crate::linalg::DenseMatrix;
use crate::problem::StandardArrowhead;

/// Largest dense order the oracle accepts.
pub const DEFAULT_CAP: usize = 5000;
/// Tolerance of the reference interior-point runs.
pub const ORACLE_TOL: f64 = 1e-8;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OracleError {
    #[error("dense order {order} exceeds the oracle cap {cap}")]
    TooLarge { order: usize, cap: usize },
    #[error("singular matrix: no pivot in column {column}")]
    Singular { column: usize },
    #[error("expected length {expected}, got {got}")]
    Dimension { expected: usize, got: usize },
}

/// Where a row of the dense system comes from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Coord {
    Primal { block: usize, index: usize },
    /// `block == None` marks a linking row.
    Dual { block: Option<usize>, index: usize },
}

/// The augmented matrix `[[Sigma - eps_p I, A^T], [A, eps_d I]]` in the flat
/// layout `(x_0, .., x_N, y_0, .., y_N, y_L)`.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseSystem {
    pub matrix: DenseMatrix,
    pub nx: usize,
    pub ny: usize,
    pub index: Vec<Coord>,
}

impl DenseSystem {
    pub fn order(&self) -> usize {
        self.nx + self.ny
    }
}

pub fn assemble_dense(p: &StandardArrowhead, sigma: &[f64], reg: Regularization) -> Result<DenseSystem, OracleError> {
    assemble_dense_capped(p, sigma, reg, DEFAULT_CAP)
}

pub fn assemble_dense_capped(p: &StandardArrowhead, sigma: &[f64], reg: Regularization, cap: usize) -> Result<DenseSystem, OracleError> {
    let nx: usize = p.problem.blocks.iter().map(|b| b.nvar()).sum();
    let ny = p.flat_rhs().len();
    let order = nx + ny;
    if order > cap {
        return Err(OracleError::TooLarge { order, cap });
    }
    if sigma.len() != nx {
        return Err(OracleError::Dimension { expected: nx, got: sigma.len() });
    }
    let mut m = DenseMatrix::zeros(order, order);
    for (j, s) in sigma.iter().enumerate() {
        m.add(j, j, s - reg.primal);
    }
    for r in 0..ny {
        m.add(nx + r, nx + r, reg.dual);
    }
    for (r, c, v) in p.triplets() {
        m.add(nx + r, c, v);
        m.add(c, nx + r, v);
    }
    let mut index = Vec::with_capacity(order);
    for (i, b) in p.problem.blocks.iter().enumerate() {
        index.extend((0..b.nvar()).map(|k| Coord::Primal { block: i, index: k }));
    }
    for (i, b) in p.problem.blocks.iter().enumerate() {
        index.extend((0..b.meq()).map(|k| Coord::Dual { block: Some(i), index: k }));
    }
    index.extend((0..p.link_rows()).map(|k| Coord::Dual { block: None, index: k }));
    Ok(DenseSystem { matrix: m, nx, ny, index })
}

/// `P A = L U` with row partial pivoting.
#[derive(Debug, Clone)]
pub struct DenseLu {
    n: usize,
    lu: Vec<f64>,
    perm: Vec<usize>,
}

impl DenseLu {
    pub fn factor(a: &DenseMatrix) -> Result<Self, OracleError> {
        let n = a.rows;
        if a.cols != n {
            return Err(OracleError::Dimension { expected: n, got: a.cols });
        }
        let mut lu = a.data.clone();
        let mut perm: Vec<usize> = (0..n).collect();
        for k in 0..n {
            let (p, big) = (k..n).map(|i| (i, lu[i * n + k].abs())).fold((k, -1.0), |acc, x| if x.1 > acc.1 { x } else { acc });
            if big == 0.0 || !big.is_finite() {
                return Err(OracleError::Singular { column: k });
            }
            if p != k {
                for c in 0..n {
                    lu.swap(k * n + c, p * n + c);
                }
                perm.swap(k, p);
            }
            let d = lu[k * n + k];
            for i in k + 1..n {
                let f = lu[i * n + k] / d;
                if f == 0.0 {
                    continue;
                }
                lu[i * n + k] = f;
                for c in k + 1..n {
                    lu[i * n + c] -= f * lu[k * n + c];
                }
            }
        }
        Ok(Self { n, lu, perm })
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let n = self.n;
        let mut x: Vec<f64> = self.perm.iter().map(|&p| b[p]).collect();
        for i in 0..n {
            let s: f64 = (0..i).map(|c| self.lu[i * n + c] * x[c]).sum();
            x[i] -= s;
        }
        for i in (0..n).rev() {
            let s: f64 = (i + 1..n).map(|c| self.lu[i * n + c] * x[c]).sum();
            x[i] = (x[i] - s) / self.lu[i * n + i];
        }
        x
    }
}

pub fn dense_kkt_solve(sys: &DenseSystem, b: &[f64]) -> Result<Vec<f64>, OracleError> {
    if b.len() != sys.order() {
        return Err(OracleError::Dimension { expected: sys.order(), got: b.len() });
    }
    Ok(DenseLu::factor(&sys.matrix)?.solve(b))
}

/// The dense reference strategy, registered as `dense`.
#[derive(Debug)]
pub struct DenseKktSolver {
    problem: Arc<StandardArrowhead>,
    reg: Regularization,
    cap: usize,
    lu: Option<DenseLu>,
    stats: KktStats,
}

impl DenseKktSolver {
    pub fn new(problem: Arc<StandardArrowhead>, reg: Regularization) -> Self {
        Self { problem, reg, cap: DEFAULT_CAP, lu: None, stats: KktStats::default() }
    }

    pub fn boxed(problem: Arc<StandardArrowhead>, config: &SolverConfig) -> Result<Box<dyn KktSolver>, KktError> {
        Ok(Box::new(Self::new(problem, config.regularization)))
    }
}

impl KktSolver for DenseKktSolver {
    fn name(&self) -> &str {
        "dense"
    }

    fn factor(&mut self, sigma: &[f64]) -> Result<(), KktError> {
        let t = Instant::now();
        self.lu = None;
        let (p, cap) = (&self.problem, self.cap);
        let result = with_regularization(self.reg, |reg| {
            let sys = assemble_dense_capped(p, sigma, reg, cap).map_err(|e| match e {
                OracleError::Dimension { expected, got } => KktError::Dimension { expected, got },
                e => KktError::Config(e.to_string()),
            })?;
            DenseLu::factor(&sys.matrix).map_err(|e| KktError::Singular { location: e.to_string(), regularization: reg.primal })
        });
        self.stats.factor_seconds += t.elapsed().as_secs_f64();
        let (lu, reg, raises) = result?;
        self.stats.factorizations += 1;
        self.stats.regularization = Some(reg);
        self.stats.regularization_increases += raises;
        self.lu = Some(lu);
        Ok(())
    }

    fn solve(&mut self, rhs: &[f64]) -> Result<Vec<f64>, KktError> {
        let lu = self.lu.as_ref().ok_or(KktError::NotFactored)?;
        if rhs.len() != lu.n {
            return Err(KktError::Dimension { expected: lu.n, got: rhs.len() });
        }
        let t = Instant::now();
        let x = lu.solve(rhs);
        self.stats.solve_seconds += t.elapsed().as_secs_f64();
        self.stats.solves += 1;
        Ok(x)
    }

    fn stats(&self) -> KktStats {
        self.stats.clone()
    }
}

/// The interior-point method with dense linear algebra at [`ORACLE_TOL`].
pub fn dense_ipm_solve(p: &StandardArrowhead) -> SolveReport {
    let opts = IpmOptions { tol: ORACLE_TOL, ..Default::default() };
    dense_ipm_solve_with(p, &opts)
}

pub fn dense_ipm_solve_with(p: &StandardArrowhead, opts: &IpmOptions) -> SolveReport {
    let mut kkt = DenseKktSolver::new(Arc::new(p.clone()), Regularization::default());
    ipm::solve(p, &mut kkt, opts)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lu_solves_with_pivoting() {
        let a = DenseMatrix::from_rows(&[vec![0.0, 2.0, 1.0], vec![1.0, 1.0, 0.0], vec![3.0, 0.0, -1.0]]);
        let lu = DenseLu::factor(&a).unwrap();
        let x = lu.solve(&[3.0, 2.0, 2.0]);
        let r = a.mul(&x);
        for (ri, bi) in r.iter().zip([3.0, 2.0, 2.0]) {
            assert!((ri - bi).abs() < 1e-14);
        }
        let s = DenseMatrix::from_rows(&[vec![1.0, 2.0], vec![2.0, 4.0]]);
        assert_eq!(DenseLu::factor(&s).unwrap_err(), OracleError::Singular { column: 1 });
    }
}
