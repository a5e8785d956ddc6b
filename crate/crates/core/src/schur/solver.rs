use std::sync::Arc;
use std::time::Instant;

use super::engine::{Engine, EngineError, Factors, Layout, NodeSummary};
use super::tree::{HierarchyOptions, SchurTree};
use super::BlockKkt;
use crate::kkt::{with_regularization, KktError, KktSolver, KktStats, SolverConfig};
use crate::problem::StandardArrowhead;

impl From<EngineError> for KktError {
    fn from(e: EngineError) -> Self {
        match e {
            EngineError::Linalg { path, source: crate::linalg::LinalgError::Singular { .. } } => KktError::Singular { location: path, regularization: 0.0 },
            EngineError::Linalg { .. } | EngineError::Pattern { .. } | EngineError::Missing(_) => KktError::Numerical(e.to_string()),
            EngineError::Assign(_) => KktError::Config(e.to_string()),
            EngineError::Comm(_) | EngineError::Rank { .. } => KktError::Runtime(e.to_string()),
        }
    }
}

/// Schur-complement strategy over a flat or hierarchical tree.
#[derive(Debug)]
pub struct SchurSolver {
    name: &'static str,
    engine: Engine,
    flat_to_z: Vec<usize>,
    nx: usize,
    config: SolverConfig,
    factors: Option<Factors>,
    stats: KktStats,
}

impl SchurSolver {
    pub fn new(name: &'static str, kkt: Arc<BlockKkt>, tree: SchurTree, config: &SolverConfig) -> Result<Self, KktError> {
        let flat_to_z = kkt.flat_to_z();
        let nx = (0..=kkt.num_blocks()).map(|j| kkt.block_nvar(j)).sum();
        let layout = Arc::new(Layout::new(kkt, tree));
        let engine = Engine::new(layout, config.ranks, config.runtime.clone())?;
        Ok(Self { name, engine, flat_to_z, nx, config: config.clone(), factors: None, stats: KktStats::default() })
    }

    pub fn flat(problem: Arc<StandardArrowhead>, config: &SolverConfig) -> Result<Self, KktError> {
        let kkt = Arc::new(BlockKkt::new(problem));
        let tree = SchurTree::flat(&kkt);
        Self::new("flat", kkt, tree, config)
    }

    pub fn hierarchical(problem: Arc<StandardArrowhead>, config: &SolverConfig) -> Result<Self, KktError> {
        let kkt = Arc::new(BlockKkt::new(problem));
        let opts = HierarchyOptions {
            layers: config.layers,
            max_layers: config.max_layers,
            partition: config.partition.clone(),
            weighted: config.weighted_partition,
        };
        let tree = SchurTree::hierarchical(&kkt, &opts).map_err(|e| KktError::Config(e.to_string()))?;
        Self::new("hierarchical", kkt, tree, config)
    }

    pub fn boxed_flat(problem: Arc<StandardArrowhead>, config: &SolverConfig) -> Result<Box<dyn KktSolver>, KktError> {
        Ok(Box::new(Self::flat(problem, config)?))
    }

    pub fn boxed_hierarchical(problem: Arc<StandardArrowhead>, config: &SolverConfig) -> Result<Box<dyn KktSolver>, KktError> {
        Ok(Box::new(Self::hierarchical(problem, config)?))
    }

    pub fn engine(&self) -> &Engine {
        &self.engine
    }

    pub fn factors(&self) -> Option<&Factors> {
        self.factors.as_ref()
    }

    pub fn summary(&self) -> Vec<NodeSummary> {
        self.factors.as_ref().map(|f| self.engine.summary(f)).unwrap_or_default()
    }
}

impl KktSolver for SchurSolver {
    fn name(&self) -> &str {
        self.name
    }

    fn factor(&mut self, sigma: &[f64]) -> Result<(), KktError> {
        if sigma.len() != self.nx {
            return Err(KktError::Dimension { expected: self.nx, got: sigma.len() });
        }
        let t = Instant::now();
        self.factors = None;
        let engine = &self.engine;
        let result = with_regularization(self.config.regularization, |reg| {
            engine.factor(sigma, reg).map_err(|e| match KktError::from(e) {
                KktError::Singular { location, .. } => KktError::Singular { location, regularization: reg.primal },
                other => other,
            })
        });
        self.stats.factor_seconds += t.elapsed().as_secs_f64();
        let (f, reg, raises) = result?;
        self.stats.factorizations += 1;
        self.stats.regularization = Some(reg);
        self.stats.regularization_increases += raises;
        self.stats.inertia = Some(f.inertia());
        self.stats.reduce_seconds += f.reduce_seconds;
        self.stats.schur = self.engine.summary(&f);
        self.factors = Some(f);
        Ok(())
    }

    fn solve(&mut self, rhs: &[f64]) -> Result<Vec<f64>, KktError> {
        let f = self.factors.as_ref().ok_or(KktError::NotFactored)?;
        if rhs.len() != self.flat_to_z.len() {
            return Err(KktError::Dimension { expected: self.flat_to_z.len(), got: rhs.len() });
        }
        let t = Instant::now();
        let mut z = vec![0.0; rhs.len()];
        for (i, &p) in self.flat_to_z.iter().enumerate() {
            z[p] = rhs[i];
        }
        let sol = self.engine.solve(f, &z)?;
        let out = self.flat_to_z.iter().map(|&p| sol[p]).collect();
        self.stats.solve_seconds += t.elapsed().as_secs_f64();
        self.stats.solves += 1;
        Ok(out)
    }

    fn stats(&self) -> KktStats {
        self.stats.clone()
    }
}
