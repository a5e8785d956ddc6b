//! Schur-complement decompositions of the block-bordered KKT system.

mod engine;
mod kkt;
mod pattern;
mod solver;
mod tree;

pub use engine::{Engine, EngineError, Factors, Layout, NodeFactor, NodeSummary, Part, SFactor};
pub use kkt::BlockKkt;
pub use pattern::{band_bound, observation_bound, BorderGroup, PatternValues, PatternViolation, SchurPattern, PATTERN_DROP_TOL};
pub use solver::SchurSolver;
pub use tree::{Child, HierarchyOptions, SchurTree, TreeError, TreeNode, DENSE_THRESHOLD, MAX_LAYERS};
