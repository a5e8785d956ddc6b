//! Strategies for the augmented system `[[Sigma, A^T], [A, 0]]` solved at
//! every interior-point step, selected by name at runtime.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use thiserror::Error;

use crate::linalg::Inertia;
use crate::problem::StandardArrowhead;
use crate::schur::NodeSummary;
use crate::runtime::RuntimeConfig;

/// Diagonal shifts: `-primal` on the `Sigma` block, `+dual` on the zero block.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Regularization {
    pub primal: f64,
    pub dual: f64,
}

impl Default for Regularization {
    fn default() -> Self {
        Self { primal: 1e-10, dual: 1e-10 }
    }
}

/// Regularization is doubled after a singular pivot until it exceeds this.
pub const MAX_REGULARIZATION: f64 = 1e-6;

impl Regularization {
    fn doubled(self) -> Self {
        Self { primal: 2.0 * self.primal, dual: 2.0 * self.dual }
    }

    fn within_cap(self) -> bool {
        self.primal <= MAX_REGULARIZATION && self.dual <= MAX_REGULARIZATION
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum KktError {
    #[error("singular system at {location} (regularization {regularization:e})")]
    Singular { location: String, regularization: f64 },
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("runtime failure: {0}")]
    Runtime(String),
    #[error("expected a vector of length {expected}, got {got}")]
    Dimension { expected: usize, got: usize },
    #[error("solve called before factor")]
    NotFactored,
    #[error("unknown KKT solver {name:?}; available: {available}")]
    UnknownSolver { name: String, available: String },
    #[error("invalid solver configuration: {0}")]
    Config(String),
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct KktStats {
    pub factorizations: usize,
    pub solves: usize,
    pub factor_seconds: f64,
    pub solve_seconds: f64,
    /// Part of `factor_seconds` spent reducing Schur contributions.
    pub reduce_seconds: f64,
    /// Regularization used by the last factorization.
    pub regularization: Option<Regularization>,
    /// Times the regularization had to be raised.
    pub regularization_increases: usize,
    pub inertia: Option<Inertia>,
    /// Per-node figures of the last factorization (Schur strategies only).
    pub schur: Vec<NodeSummary>,
}

/// A factor-then-solve strategy for the augmented system in flat layout
/// `(x_0, x_1, .., x_N, y_0, y_1, .., y_N, y_L)`.
pub trait KktSolver: Send {
    fn name(&self) -> &str;

    /// Factors `[[Sigma - eps_p I, A^T], [A, eps_d I]]`.
    fn factor(&mut self, sigma: &[f64]) -> Result<(), KktError>;

    /// Solves with the last factorization; `rhs` and the result are `(x, y)` stacked.
    fn solve(&mut self, rhs: &[f64]) -> Result<Vec<f64>, KktError>;

    fn stats(&self) -> KktStats;
}

/// Options shared by all strategies; each uses what applies to it.
#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    pub ranks: usize,
    pub layers: usize,
    pub max_layers: usize,
    /// Explicit top-level cuts for the hierarchical strategy.
    pub partition: Option<Vec<usize>>,
    pub weighted_partition: bool,
    pub runtime: RuntimeConfig,
    pub regularization: Regularization,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            ranks: 1,
            layers: 2,
            max_layers: 0,
            partition: None,
            weighted_partition: false,
            runtime: RuntimeConfig::default(),
            regularization: Regularization::default(),
        }
    }
}

/// Runs `attempt` with growing regularization while it fails on a singular pivot.
pub fn with_regularization<T>(
    start: Regularization,
    mut attempt: impl FnMut(Regularization) -> Result<T, KktError>,
) -> Result<(T, Regularization, usize), KktError> {
    let mut reg = start;
    let mut raises = 0;
    loop {
        match attempt(reg) {
            Ok(v) => return Ok((v, reg, raises)),
            Err(KktError::Singular { .. }) if reg.doubled().within_cap() => {
                reg = reg.doubled();
                raises += 1;
            }
            Err(e) => return Err(e),
        }
    }
}

pub type SolverFactory = fn(Arc<StandardArrowhead>, &SolverConfig) -> Result<Box<dyn KktSolver>, KktError>;

/// Name-to-factory table of KKT strategies.
#[derive(Clone, Default)]
pub struct SolverRegistry {
    entries: BTreeMap<String, SolverFactory>,
}

impl fmt::Debug for SolverRegistry {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_list().entries(self.entries.keys()).finish()
    }
}

impl SolverRegistry {
    pub fn new() -> Self {
        Self::default()
    }

    /// Registry with `dense`, `flat` and `hierarchical`.
    pub fn with_defaults() -> Self {
        let mut r = Self::new();
        r.register("dense", crate::oracle::DenseKktSolver::boxed);
        r.register("flat", crate::schur::SchurSolver::boxed_flat);
        r.register("hierarchical", crate::schur::SchurSolver::boxed_hierarchical);
        r
    }

    /// Adds or replaces a strategy.
    pub fn register(&mut self, name: &str, factory: SolverFactory) {
        self.entries.insert(name.to_string(), factory);
    }

    pub fn names(&self) -> Vec<&str> {
        self.entries.keys().map(String::as_str).collect()
    }

    pub fn contains(&self, name: &str) -> bool {
        self.entries.contains_key(name)
    }

    pub fn create(&self, name: &str, problem: Arc<StandardArrowhead>, config: &SolverConfig) -> Result<Box<dyn KktSolver>, KktError> {
        let factory = self.entries.get(name).ok_or_else(|| KktError::UnknownSolver { name: name.to_string(), available: self.names().join(", ") })?;
        factory(problem, config)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn regularization_doubles_until_cap() {
        let mut seen = Vec::new();
        let r = with_regularization(Regularization::default(), |reg| -> Result<(), KktError> {
            seen.push(reg.primal);
            Err(KktError::Singular { location: "root".into(), regularization: reg.primal })
        });
        assert!(r.is_err());
        assert_eq!(seen.len(), 14);
        assert!(*seen.last().unwrap() <= MAX_REGULARIZATION);
        let (_, reg, raises) = with_regularization(Regularization::default(), |reg| if reg.primal > 5e-10 { Ok(()) } else { Err(KktError::Singular { location: String::new(), regularization: 0.0 }) }).unwrap();
        assert_eq!(raises, 3);
        assert_eq!(reg.primal, 8e-10);
    }

    #[test]
    fn unknown_name_lists_choices() {
        let r = SolverRegistry::with_defaults();
        assert_eq!(r.names(), vec!["dense", "flat", "hierarchical"]);
        let p = crate::problem::generate(&crate::problem::GeneratorParams::default()).unwrap();
        let s = Arc::new(crate::problem::to_standard_form(&p.problem).unwrap());
        let err = r.create("magic", s, &SolverConfig::default()).err().unwrap();
        assert!(err.to_string().contains("dense, flat, hierarchical"));
    }
}
