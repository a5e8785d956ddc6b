//! Distributed factorization and solve over a [`SchurTree`].
//!
//! Every node `X` eliminates its children (blocks or subtrees) and keeps the
//! Schur complement `S_X = A_X - sum_c C_c^T M_c^{-1} C_c` over its own
//! border. Contributions are reduced to the node's lead rank keyed by part,
//! so sums always fold in the same order whatever the rank layout.

use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;
use std::time::Instant;

use thiserror::Error;

use super::pattern::{PatternValues, PatternViolation, SchurPattern};
use super::tree::{Child, SchurTree};
use super::BlockKkt;
use crate::kkt::Regularization;
use crate::linalg::{minimum_degree, schur_contribution, CscMatrix, DenseLdlt, Inertia, LinalgError, SparseLdlt};
use crate::runtime::{assign_ranks, spawn, AssignError, Assignment, CommError, Communicator, Rank, Reducible, RuntimeConfig, SpawnError};

/// Columns handed to a subtree solve at once.
const BATCH: usize = 64;

/// A piece of the unknowns below a node.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Part {
    Block(usize),
    /// The border of tree node `d`.
    Border(usize),
}

type Cols = Vec<Vec<f64>>;
type PartMap = BTreeMap<Part, Cols>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EngineError {
    #[error("{path}: {source}")]
    Linalg { path: String, source: LinalgError },
    #[error("{path}: {source}")]
    Pattern { path: String, source: PatternViolation },
    #[error(transparent)]
    Comm(#[from] CommError),
    #[error(transparent)]
    Assign(#[from] AssignError),
    #[error("rank {rank}: {message}")]
    Rank { rank: usize, message: String },
    #[error("missing factor for {0}")]
    Missing(String),
}

impl EngineError {
    pub fn is_singular(&self) -> bool {
        matches!(self, EngineError::Linalg { source: LinalgError::Singular { .. }, .. })
    }
}

fn flatten(e: SpawnError<EngineError>) -> EngineError {
    match e {
        SpawnError::Program { error, .. } => error,
        SpawnError::Deadlock { blocked } => EngineError::Comm(CommError::Deadlock { blocked }),
        SpawnError::Panic { rank, message } => EngineError::Rank { rank, message },
        SpawnError::NoRanks(n) => EngineError::Rank { rank: 0, message: format!("invalid rank count {n}") },
    }
}

/// Triplet pieces reduced by key; distinct ranks never share a key.
struct Piece(Vec<(usize, usize, f64)>);

impl Reducible for Piece {
    fn combine(&mut self, other: &Self) -> Result<(), CommError> {
        self.0.extend_from_slice(&other.0);
        Ok(())
    }
}

struct Panel(Cols);

impl Reducible for Panel {
    fn combine(&mut self, other: &Self) -> Result<(), CommError> {
        for (a, b) in self.0.iter_mut().zip(&other.0) {
            a.combine(b)?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub enum SFactor {
    Dense(DenseLdlt),
    Sparse(SparseLdlt),
}

impl SFactor {
    fn solve_in_place(&self, x: &mut [f64]) {
        match self {
            SFactor::Dense(f) => f.solve_in_place(x),
            SFactor::Sparse(f) => f.solve_in_place(x),
        }
    }

    pub fn inertia(&self) -> Inertia {
        match self {
            SFactor::Dense(f) => f.inertia(),
            SFactor::Sparse(f) => f.inertia(),
        }
    }
}

/// Factored Schur complement of one node, kept on the node's lead rank.
#[derive(Debug, Clone)]
pub struct NodeFactor {
    /// Assembled `S` on the node pattern.
    pub schur: PatternValues,
    /// Sum of the children's contributions.
    pub contribution: PatternValues,
    pub factor: SFactor,
}

/// Factors held by one rank, or by all ranks once merged.
#[derive(Debug, Clone, Default)]
pub struct Factors {
    pub blocks: Vec<Option<SparseLdlt>>,
    pub nodes: Vec<Option<NodeFactor>>,
    /// Longest time any rank spent reducing and assembling Schur complements.
    pub reduce_seconds: f64,
}

impl Factors {
    fn empty(num_blocks: usize, num_nodes: usize) -> Self {
        Self { blocks: vec![None; num_blocks + 1], nodes: vec![None; num_nodes], reduce_seconds: 0.0 }
    }

    fn block(&self, j: usize) -> Result<&SparseLdlt, EngineError> {
        self.blocks[j].as_ref().ok_or_else(|| EngineError::Missing(format!("block {j}")))
    }

    fn node(&self, x: usize) -> Result<&NodeFactor, EngineError> {
        self.nodes[x].as_ref().ok_or_else(|| EngineError::Missing(format!("node {x}")))
    }

    fn merge(&mut self, other: Factors) {
        self.reduce_seconds = self.reduce_seconds.max(other.reduce_seconds);
        for (a, b) in self.blocks.iter_mut().zip(other.blocks) {
            if b.is_some() {
                *a = b;
            }
        }
        for (a, b) in self.nodes.iter_mut().zip(other.nodes) {
            if b.is_some() {
                *a = b;
            }
        }
    }

    /// Inertia of the whole system: blocks plus every Schur complement.
    pub fn inertia(&self) -> Inertia {
        let mut t = Inertia::default();
        let parts = self.blocks.iter().flatten().map(SparseLdlt::inertia).chain(self.nodes.iter().flatten().map(|n| n.factor.inertia()));
        for i in parts {
            t.positive += i.positive;
            t.negative += i.negative;
            t.zero += i.zero;
        }
        t
    }
}

/// Static data derived from the block structure and the tree.
#[derive(Debug)]
pub struct Layout {
    kkt: Arc<BlockKkt>,
    tree: SchurTree,
    patterns: Vec<SchurPattern>,
    orders: Vec<Vec<usize>>,
    /// `pos[x][z]` = position of `z_0` index `z` in the border of node `x`.
    pos: Vec<Vec<usize>>,
    /// Coupling of each part below a node to the node's border.
    couplings: Vec<BTreeMap<Part, CscMatrix>>,
    /// Per node and child: border columns touched by the child's parts.
    child_cols: Vec<Vec<Vec<usize>>>,
}

impl Layout {
    pub fn new(kkt: Arc<BlockKkt>, tree: SchurTree) -> Self {
        let z0 = kkt.z0_dim();
        let patterns: Vec<SchurPattern> = tree.nodes.iter().map(|n| n.pattern()).collect();
        let orders = tree
            .nodes
            .iter()
            .zip(&patterns)
            .map(|(n, p)| if n.dense { Vec::new() } else { minimum_degree(&p.adjacency()) })
            .collect();
        let pos: Vec<Vec<usize>> = tree
            .nodes
            .iter()
            .map(|n| {
                let mut v = vec![usize::MAX; z0];
                for (k, &z) in n.border.iter().enumerate() {
                    v[z] = k;
                }
                v
            })
            .collect();
        let mut couplings = Vec::with_capacity(tree.nodes.len());
        let mut child_cols = Vec::with_capacity(tree.nodes.len());
        for node in &tree.nodes {
            let x = node.id;
            let nb = node.border.len();
            let mut map = BTreeMap::new();
            let mut cols_per_child = Vec::new();
            for &c in &node.children {
                let (blocks, borders) = match c {
                    Child::Block(j) => (vec![j], Vec::new()),
                    Child::Node(d) => (tree.node(d).blocks.clone().collect(), tree.subtree(d)),
                };
                let mut cols = BTreeSet::new();
                for j in blocks {
                    let l = kkt.border(j);
                    let mut t = Vec::new();
                    for col in 0..l.ncols {
                        let p = pos[x][col];
                        if p != usize::MAX {
                            t.extend(l.col(col).map(|(r, v)| (r, p, v)));
                        }
                    }
                    if !t.is_empty() {
                        let m = CscMatrix::from_triplets(l.nrows, nb, &t);
                        cols.extend(m.nonzero_cols());
                        map.insert(Part::Block(j), m);
                    }
                }
                for d in borders {
                    let mut t = Vec::new();
                    for &(a, b, v) in kkt.corner_offdiag() {
                        for (u, w) in [(a, b), (b, a)] {
                            if pos[d][u] != usize::MAX && pos[x][w] != usize::MAX {
                                t.push((pos[d][u], pos[x][w], v));
                            }
                        }
                    }
                    if !t.is_empty() {
                        let m = CscMatrix::from_triplets(tree.node(d).border.len(), nb, &t);
                        cols.extend(m.nonzero_cols());
                        map.insert(Part::Border(d), m);
                    }
                }
                cols_per_child.push(cols.into_iter().collect());
            }
            couplings.push(map);
            child_cols.push(cols_per_child);
        }
        Self { kkt, tree, patterns, orders, pos, couplings, child_cols }
    }

    pub fn kkt(&self) -> &BlockKkt {
        &self.kkt
    }

    pub fn tree(&self) -> &SchurTree {
        &self.tree
    }

    pub fn pattern(&self, node: usize) -> &SchurPattern {
        &self.patterns[node]
    }

    fn part_dim(&self, p: Part) -> usize {
        match p {
            Part::Block(j) => self.kkt.block_dim(j),
            Part::Border(d) => self.tree.node(d).border.len(),
        }
    }

    /// Human-readable location, e.g. `root > node 1 > block 4`.
    pub fn path(&self, node: usize, block: Option<usize>) -> String {
        let mut parts: Vec<String> = self.tree.path(node).into_iter().map(|x| if x == 0 { "root".to_string() } else { format!("node {x}") }).collect();
        if let Some(j) = block {
            parts.push(format!("block {j}"));
        }
        parts.join(" > ")
    }
}

/// Per-node figures of a factorization.
#[derive(Debug, Clone, PartialEq)]
pub struct NodeSummary {
    pub id: usize,
    pub dim: usize,
    pub dense: bool,
    /// Nonzeros of the full symmetric `S`.
    pub schur_nnz: usize,
    /// Nonzeros of the full symmetric contribution sum.
    pub contribution_nnz: usize,
    pub dropped: usize,
}

/// Runs the factor and solve phases on a simulated rank layout.
#[derive(Debug)]
pub struct Engine {
    layout: Arc<Layout>,
    assignment: Assignment,
    comms: Vec<Communicator>,
    config: RuntimeConfig,
}

impl Engine {
    /// `ranks` is clamped to `1..=N`.
    pub fn new(layout: Arc<Layout>, ranks: usize, config: RuntimeConfig) -> Result<Self, EngineError> {
        let n = layout.kkt.num_blocks();
        let assignment = assign_ranks(&layout.tree.shape(), ranks.clamp(1, n.max(1)))?;
        let comms = assignment.node_ranks.iter().enumerate().map(|(x, r)| Communicator::new(1 + x as u64, r.clone())).collect();
        Ok(Self { layout, assignment, comms, config })
    }

    pub fn layout(&self) -> &Layout {
        &self.layout
    }

    pub fn assignment(&self) -> &Assignment {
        &self.assignment
    }

    pub fn num_ranks(&self) -> usize {
        self.assignment.num_ranks
    }

    fn owner(&self, j: usize) -> usize {
        self.assignment.block_owner[j - 1]
    }

    fn member(&self, x: usize, rank: usize) -> bool {
        self.comms[x].contains(rank)
    }

    /// Factors the system for the given `Sigma` (flat primal order).
    pub fn factor(&self, sigma: &[f64], reg: Regularization) -> Result<Factors, EngineError> {
        let kkt = &self.layout.kkt;
        let parts = kkt.split_sigma(sigma);
        let corner = kkt.corner_matrix(parts[0], reg).entries;
        let nn = self.layout.tree.nodes.len();
        let locals = spawn(self.num_ranks(), &self.config, |rank| {
            let mut f = Factors::empty(kkt.num_blocks(), nn);
            let blocks = |j: usize| kkt.block_matrix(j, parts[j], reg);
            self.node_factor(rank, &mut f, 0, &blocks, &corner)?;
            Ok(f)
        })
        .map_err(flatten)?;
        let mut all = Factors::empty(kkt.num_blocks(), nn);
        for f in locals {
            all.merge(f);
        }
        Ok(all)
    }

    /// Solves for several right-hand sides given in `z` order.
    pub fn solve_many(&self, f: &Factors, rhs: &[Vec<f64>]) -> Result<Vec<Vec<f64>>, EngineError> {
        let kkt = &self.layout.kkt;
        let k = rhs.len();
        let base = kkt.z0_base();
        let tree = &self.layout.tree;
        let slice = |p: Part| -> Cols {
            match p {
                Part::Block(j) => {
                    let o = kkt.z_offset(j);
                    rhs.iter().map(|r| r[o..o + kkt.block_dim(j)].to_vec()).collect()
                }
                Part::Border(d) => rhs.iter().map(|r| tree.node(d).border.iter().map(|&z| r[base + z]).collect()).collect(),
            }
        };
        let maps = spawn(self.num_ranks(), &self.config, |rank| self.node_solve(rank, f, 0, k, &slice)).map_err(flatten)?;
        let mut out = vec![vec![0.0; kkt.total_dim()]; k];
        for m in maps {
            for (p, cols) in m {
                for (o, c) in out.iter_mut().zip(cols) {
                    match p {
                        Part::Block(j) => {
                            let s = kkt.z_offset(j);
                            o[s..s + c.len()].copy_from_slice(&c);
                        }
                        Part::Border(d) => {
                            for (&z, v) in tree.node(d).border.iter().zip(c) {
                                o[base + z] = v;
                            }
                        }
                    }
                }
            }
        }
        Ok(out)
    }

    pub fn solve(&self, f: &Factors, rhs: &[f64]) -> Result<Vec<f64>, EngineError> {
        Ok(self.solve_many(f, &[rhs.to_vec()])?.pop().expect("one column"))
    }

    pub fn summary(&self, f: &Factors) -> Vec<NodeSummary> {
        self.layout
            .tree
            .nodes
            .iter()
            .map(|n| {
                let p = &self.layout.patterns[n.id];
                let (schur_nnz, contribution_nnz, dropped) =
                    f.nodes[n.id].as_ref().map_or((0, 0, 0), |nf| (nf.schur.nnz(p), nf.contribution.nnz(p), nf.contribution.dropped));
                NodeSummary { id: n.id, dim: n.border.len(), dense: n.dense, schur_nnz, contribution_nnz, dropped }
            })
            .collect()
    }

    fn node_factor(
        &self,
        rank: &Rank,
        f: &mut Factors,
        x: usize,
        blocks: &dyn Fn(usize) -> crate::linalg::SymTriplets,
        corner: &[(usize, usize, f64)],
    ) -> Result<(), EngineError> {
        let lay = &*self.layout;
        let node = lay.tree.node(x);
        let me = rank.id();
        for &c in &node.children {
            match c {
                Child::Block(j) if self.owner(j) == me => {
                    let fac = SparseLdlt::factor_with_order(&blocks(j), lay.kkt.block_order(j))
                        .map_err(|source| EngineError::Linalg { path: lay.path(x, Some(j)), source })?;
                    f.blocks[j] = Some(fac);
                }
                Child::Node(d) if self.member(d, me) => self.node_factor(rank, f, d, blocks, corner)?,
                _ => {}
            }
        }
        let nb = node.border.len();
        if nb == 0 {
            return Ok(());
        }
        let cpl = &lay.couplings[x];
        let mut pieces: BTreeMap<Part, Vec<(usize, usize, f64)>> = BTreeMap::new();
        for (ci, &c) in node.children.iter().enumerate() {
            match c {
                Child::Block(j) if self.owner(j) == me => {
                    if let Some(m) = cpl.get(&Part::Block(j)) {
                        let fac = f.block(j)?;
                        pieces.insert(Part::Block(j), schur_contribution(m, |b| fac.solve_multi(b)));
                    }
                }
                Child::Node(d) if self.member(d, me) => {
                    for batch in lay.child_cols[x][ci].chunks(BATCH) {
                        let rhs = |p: Part| -> Cols {
                            let dim = lay.part_dim(p);
                            batch
                                .iter()
                                .map(|&b| {
                                    let mut v = vec![0.0; dim];
                                    if let Some(m) = cpl.get(&p) {
                                        for (r, val) in m.col(b) {
                                            v[r] = val;
                                        }
                                    }
                                    v
                                })
                                .collect()
                        };
                        let sol = self.node_solve(rank, f, d, batch.len(), &rhs)?;
                        for (p, s) in sol {
                            let Some(m) = cpl.get(&p) else { continue };
                            let piece = pieces.entry(p).or_default();
                            for (&b, col) in batch.iter().zip(&s) {
                                let mut prod = vec![0.0; nb];
                                m.mul_t_add(col, &mut prod);
                                piece.extend(prod.iter().enumerate().skip(b).filter(|(_, v)| **v != 0.0).map(|(i, &v)| (i, b, v)));
                            }
                        }
                    }
                }
                _ => {}
            }
        }
        let items: Vec<(Part, Piece)> = pieces.into_iter().map(|(p, t)| (p, Piece(t))).collect();
        let started = Instant::now();
        let reduced = self.comms[x].reduce_keyed(rank, 0, items)?;
        f.reduce_seconds += started.elapsed().as_secs_f64();
        let Some(map) = reduced else { return Ok(()) };
        let started = Instant::now();

        let pattern = &lay.patterns[x];
        let pos = &lay.pos[x];
        let bad = |source| EngineError::Pattern { path: lay.path(x, None), source };
        let mut contribution = pattern.zeros();
        for piece in map.values() {
            for &(i, j, v) in &piece.0 {
                pattern.accumulate(&mut contribution, i, j, v).map_err(bad)?;
            }
        }
        let mut schur = pattern.zeros();
        for &(a, b, v) in corner {
            if pos[a] != usize::MAX && pos[b] != usize::MAX {
                pattern.accumulate(&mut schur, pos[a], pos[b], v).map_err(bad)?;
            }
        }
        for (s, c) in schur.values.iter_mut().zip(&contribution.values) {
            *s -= c;
        }
        let singular = |source| EngineError::Linalg { path: lay.path(x, None), source };
        let factor = if node.dense {
            SFactor::Dense(DenseLdlt::factor(&pattern.to_dense(&schur)).map_err(singular)?)
        } else {
            SFactor::Sparse(SparseLdlt::factor_with_order(&pattern.to_triplets(&schur), &lay.orders[x]).map_err(singular)?)
        };
        f.nodes[x] = Some(NodeFactor { schur, contribution, factor });
        f.reduce_seconds += started.elapsed().as_secs_f64();
        Ok(())
    }

    /// Solves with the subsystem below node `x` for `k` columns. Returns the
    /// parts this rank is responsible for: blocks it owns and the borders of
    /// nodes it leads.
    fn node_solve(&self, rank: &Rank, f: &Factors, x: usize, k: usize, rhs: &dyn Fn(Part) -> Cols) -> Result<PartMap, EngineError> {
        let lay = &*self.layout;
        let node = lay.tree.node(x);
        let me = rank.id();
        let mut first = PartMap::new();
        for &c in &node.children {
            match c {
                Child::Block(j) if self.owner(j) == me => {
                    let mut cols = rhs(Part::Block(j));
                    f.block(j)?.solve_multi(&mut cols);
                    first.insert(Part::Block(j), cols);
                }
                Child::Node(d) if self.member(d, me) => first.extend(self.node_solve(rank, f, d, k, rhs)?),
                _ => {}
            }
        }
        let nb = node.border.len();
        if nb == 0 {
            return Ok(first);
        }
        let cpl = &lay.couplings[x];
        let items: Vec<(Part, Panel)> = first
            .iter()
            .filter_map(|(p, sol)| {
                cpl.get(p).map(|m| {
                    let cols = sol
                        .iter()
                        .map(|s| {
                            let mut out = vec![0.0; nb];
                            m.mul_t_add(s, &mut out);
                            out
                        })
                        .collect();
                    (*p, Panel(cols))
                })
            })
            .collect();
        let comm = &self.comms[x];
        let u = match comm.reduce_keyed(rank, 0, items)? {
            Some(map) => {
                let mut v = rhs(Part::Border(x));
                for piece in map.values() {
                    for (vc, pc) in v.iter_mut().zip(&piece.0) {
                        for (a, b) in vc.iter_mut().zip(pc) {
                            *a -= b;
                        }
                    }
                }
                let nf = f.node(x)?;
                for col in &mut v {
                    nf.factor.solve_in_place(col);
                }
                Some(v)
            }
            None => None,
        };
        let lead = u.is_some();
        let u: Cols = comm.broadcast(rank, 0, u)?;

        let shifted = |p: Part| -> Cols {
            let mut cols = rhs(p);
            if let Some(m) = cpl.get(&p) {
                for (c, uc) in cols.iter_mut().zip(&u) {
                    let mut t = vec![0.0; c.len()];
                    m.mul_add(uc, &mut t);
                    for (a, b) in c.iter_mut().zip(&t) {
                        *a -= b;
                    }
                }
            }
            cols
        };
        let mut out = PartMap::new();
        for &c in &node.children {
            match c {
                Child::Block(j) if self.owner(j) == me => {
                    let mut cols = shifted(Part::Block(j));
                    f.block(j)?.solve_multi(&mut cols);
                    out.insert(Part::Block(j), cols);
                }
                Child::Node(d) if self.member(d, me) => out.extend(self.node_solve(rank, f, d, k, &shifted)?),
                _ => {}
            }
        }
        if lead {
            out.insert(Part::Border(x), u);
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::DenseMatrix;
    use crate::problem::{generate, to_standard_form, GeneratorParams};
    use crate::schur::tree::HierarchyOptions;

    fn kkt(n: usize, seed: u64) -> Arc<BlockKkt> {
        let mut p = GeneratorParams::new(n, 2, 5).with_uniform_local_links(1).with_seed(seed);
        p.linking_vars = 2;
        p.global_links = 1;
        let g = generate(&p).unwrap();
        Arc::new(BlockKkt::new(Arc::new(to_standard_form(&g.problem).unwrap())))
    }

    fn sigma(k: &BlockKkt) -> Vec<f64> {
        let n: usize = (0..=k.num_blocks()).map(|j| k.block_nvar(j)).sum();
        (0..n).map(|i| -1.0 - (i % 7) as f64 * 0.3).collect()
    }

    fn residual(k: &BlockKkt, s: &[f64], reg: Regularization, z: &[f64], rhs: &[f64]) -> f64 {
        let m = k.z_matrix(s, reg);
        let r = m.mul(z);
        r.iter().zip(rhs).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
    }

    fn check(tree: SchurTree, k: Arc<BlockKkt>, ranks: usize) {
        let s = sigma(&k);
        let reg = Regularization::default();
        let layout = Arc::new(Layout::new(k.clone(), tree));
        let e = Engine::new(layout, ranks, RuntimeConfig::default()).unwrap();
        let f = e.factor(&s, reg).unwrap();
        let rhs: Vec<f64> = (0..k.total_dim()).map(|i| ((i * 37 % 11) as f64) - 5.0).collect();
        let z = e.solve(&f, &rhs).unwrap();
        let r = residual(&k, &s, reg, &z, &rhs);
        assert!(r < 1e-9, "residual {r}");
        let inertia = f.inertia();
        assert_eq!(inertia.positive + inertia.negative, k.total_dim());
    }

    #[test]
    fn flat_solves() {
        for ranks in [1, 2, 5] {
            let k = kkt(5, 3);
            check(SchurTree::flat(&k), k, ranks);
        }
    }

    #[test]
    fn hierarchical_solves() {
        for (n, layers) in [(4, 2), (9, 2), (10, 3), (2, 2)] {
            let k = kkt(n, n as u64);
            let t = SchurTree::hierarchical(&k, &HierarchyOptions { layers, ..Default::default() }).unwrap();
            for ranks in [1, 3, n] {
                check(t.clone(), k.clone(), ranks);
            }
        }
    }

    #[test]
    fn schur_is_rank_independent() {
        let k = kkt(8, 11);
        let t = SchurTree::hierarchical(&k, &HierarchyOptions { layers: 3, ..Default::default() }).unwrap();
        let layout = Arc::new(Layout::new(k.clone(), t));
        let s = sigma(&k);
        let mut reference: Option<Vec<Vec<u64>>> = None;
        for ranks in [1, 2, 4, 8] {
            let e = Engine::new(layout.clone(), ranks, RuntimeConfig::default()).unwrap();
            let f = e.factor(&s, Regularization::default()).unwrap();
            let bits: Vec<Vec<u64>> = f.nodes.iter().flatten().map(|n| n.schur.values.iter().map(|v| v.to_bits()).collect()).collect();
            match &reference {
                None => reference = Some(bits),
                Some(r) => assert_eq!(r, &bits, "ranks {ranks}"),
            }
        }
    }

    #[test]
    fn singular_block_reports_path() {
        let k = kkt(3, 1);
        let layout = Arc::new(Layout::new(k.clone(), SchurTree::flat(&k)));
        let e = Engine::new(layout, 1, RuntimeConfig::default()).unwrap();
        let s = vec![0.0; sigma(&k).len()];
        let err = e.factor(&s, Regularization { primal: 0.0, dual: 0.0 }).unwrap_err();
        assert!(err.is_singular());
        assert!(err.to_string().starts_with("root > block 1"), "{err}");
    }

    #[test]
    fn flat_root_matches_dense_schur() {
        let k = kkt(3, 5);
        let s = sigma(&k);
        let reg = Regularization::default();
        let layout = Arc::new(Layout::new(k.clone(), SchurTree::flat(&k)));
        let e = Engine::new(layout.clone(), 2, RuntimeConfig::default()).unwrap();
        let f = e.factor(&s, reg).unwrap();
        let got = layout.pattern(0).to_dense(&f.nodes[0].as_ref().unwrap().schur);
        // dense reference: S = K0 - sum L_j^T K_j^{-1} L_j
        let z0 = k.z0_dim();
        let mut want = DenseMatrix::zeros(z0, z0);
        let parts = k.split_sigma(&s);
        for (a, b, v) in k.corner_matrix(parts[0], reg).entries {
            want.add(a, b, v);
            if a != b {
                want.add(b, a, v);
            }
        }
        for j in 1..=3 {
            let kj = k.block_matrix(j, parts[j], reg);
            let kd = DenseLdlt::factor(&DenseMatrix::from_rows(&kj.to_dense())).unwrap();
            let l = k.border(j).to_dense();
            for c in 0..z0 {
                let col: Vec<f64> = l.iter().map(|r| r[c]).collect();
                let w = kd.solve(&col);
                for r in 0..z0 {
                    let v: f64 = l.iter().zip(&w).map(|(lr, wi)| lr[r] * wi).sum();
                    want.add(r, c, -v);
                }
            }
        }
        for r in 0..z0 {
            for c in 0..z0 {
                assert!((got.get(r, c) - want.get(r, c)).abs() < 1e-10, "({r},{c})");
            }
        }
    }
}
