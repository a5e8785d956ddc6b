use std::ops::Range;

use thiserror::Error;

use super::pattern::{band_bound, BorderGroup, SchurPattern};
use super::BlockKkt;
use crate::runtime::ShapeNode;

/// Default cap on the number of layers.
pub const MAX_LAYERS: usize = 4;
/// Flat Schur complements denser than this are stored dense.
pub const DENSE_THRESHOLD: f64 = 0.25;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Child {
    Block(usize),
    Node(usize),
}

#[derive(Debug, Clone, PartialEq)]
pub struct TreeNode {
    pub id: usize,
    /// Blocks below this node (1-based, half-open).
    pub blocks: Range<usize>,
    pub children: Vec<Child>,
    /// The node's own Schur unknowns as `z_0` indices, in border order.
    pub border: Vec<usize>,
    pub groups: Vec<(BorderGroup, usize)>,
    /// Whether the node's Schur complement is stored and factored densely.
    pub dense: bool,
    pub parent: Option<usize>,
    pub depth: usize,
}

impl TreeNode {
    pub fn is_leaf(&self) -> bool {
        self.children.iter().all(|c| matches!(c, Child::Block(_)))
    }

    pub fn pattern(&self) -> SchurPattern {
        SchurPattern::new(&self.groups)
    }
}

/// Nodes in preorder; `nodes[0]` is the root.
#[derive(Debug, Clone, PartialEq)]
pub struct SchurTree {
    pub nodes: Vec<TreeNode>,
    pub hierarchical: bool,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct HierarchyOptions {
    pub layers: usize,
    /// Defaults to [`MAX_LAYERS`] when zero.
    pub max_layers: usize,
    /// Explicit top-level cuts: a cut `i` separates block `i` from `i + 1`.
    pub partition: Option<Vec<usize>>,
    /// Place cuts on pairs with few local links near the balanced positions.
    pub weighted: bool,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TreeError {
    #[error("layer count {layers} outside 1..={max}")]
    Layers { layers: usize, max: usize },
    #[error("invalid partition {cuts:?} for {blocks} blocks: cuts must be strictly increasing within 1..{blocks}")]
    Partition { cuts: Vec<usize>, blocks: usize },
}

impl SchurTree {
    /// One Schur complement over all of `z_0`, children = all blocks.
    pub fn flat(kkt: &BlockKkt) -> Self {
        let n = kkt.num_blocks();
        let mut groups: Vec<(BorderGroup, usize)> = (1..n).map(|p| (BorderGroup::Pair(p), kkt.local_count(p))).collect();
        groups.push((BorderGroup::Global, kkt.global_count()));
        groups.push((BorderGroup::X0, kkt.n0()));
        groups.push((BorderGroup::Y0, kkt.m0()));
        let dense = SchurPattern::new(&groups).density() >= DENSE_THRESHOLD;
        let root = TreeNode {
            id: 0,
            blocks: 1..n + 1,
            children: (1..=n).map(Child::Block).collect(),
            border: (0..kkt.z0_dim()).collect(),
            groups,
            dense,
            parent: None,
            depth: 0,
        };
        Self { nodes: vec![root], hierarchical: false }
    }

    /// Dense root over global rows, `x_0` and `y_0`, above a recursive split
    /// of the blocks. Each node owns the local-link rows of the pairs it cuts.
    pub fn hierarchical(kkt: &BlockKkt, opts: &HierarchyOptions) -> Result<Self, TreeError> {
        let max = if opts.max_layers == 0 { MAX_LAYERS } else { opts.max_layers };
        if opts.layers < 1 || opts.layers > max {
            return Err(TreeError::Layers { layers: opts.layers, max });
        }
        if opts.layers == 1 {
            return Ok(Self::flat(kkt));
        }
        let n = kkt.num_blocks();
        if let Some(cuts) = &opts.partition {
            if cuts.is_empty() || cuts.windows(2).any(|w| w[0] >= w[1]) || cuts[0] < 1 || *cuts.last().unwrap() >= n {
                return Err(TreeError::Partition { cuts: cuts.clone(), blocks: n });
            }
        }
        let mut border: Vec<usize> = kkt.global_range().collect();
        border.extend(kkt.x0_range());
        border.extend(kkt.y0_range());
        let root = TreeNode {
            id: 0,
            blocks: 1..n + 1,
            children: vec![Child::Node(1)],
            border,
            groups: vec![(BorderGroup::Global, kkt.global_count()), (BorderGroup::X0, kkt.n0()), (BorderGroup::Y0, kkt.m0())],
            dense: true,
            parent: None,
            depth: 0,
        };
        let mut tree = Self { nodes: vec![root], hierarchical: true };
        tree.build(kkt, opts, 1..n + 1, opts.layers - 1, Some(0), 1, true);
        Ok(tree)
    }

    #[allow(clippy::too_many_arguments)]
    fn build(&mut self, kkt: &BlockKkt, opts: &HierarchyOptions, blocks: Range<usize>, levels: usize, parent: Option<usize>, depth: usize, top: bool) -> usize {
        let id = self.nodes.len();
        let n = blocks.len();
        let k = (n as f64).sqrt().round() as usize;
        let explicit = if top { opts.partition.clone() } else { None };
        self.nodes.push(TreeNode {
            id,
            blocks: blocks.clone(),
            children: Vec::new(),
            border: Vec::new(),
            groups: Vec::new(),
            dense: false,
            parent,
            depth,
        });
        let split = explicit.is_some() || (levels > 0 && k >= 2);
        let (cuts, children) = if !split {
            let pairs: Vec<usize> = (blocks.start..blocks.end - 1).collect();
            (pairs, blocks.clone().map(Child::Block).collect::<Vec<_>>())
        } else {
            let cuts = explicit.unwrap_or_else(|| choose_cuts(kkt, &blocks, k, opts.weighted));
            let mut ranges = Vec::with_capacity(cuts.len() + 1);
            let mut lo = blocks.start;
            for &c in &cuts {
                ranges.push(lo..c + 1);
                lo = c + 1;
            }
            ranges.push(lo..blocks.end);
            let mut kids = Vec::with_capacity(ranges.len());
            for r in ranges {
                let child = self.build(kkt, opts, r, levels.saturating_sub(1), Some(id), depth + 1, false);
                kids.push(Child::Node(child));
            }
            (cuts, kids)
        };
        let node = &mut self.nodes[id];
        node.groups = cuts.iter().map(|&p| (BorderGroup::Pair(p), kkt.local_count(p))).collect();
        node.border = cuts.iter().flat_map(|&p| kkt.pair_range(p)).collect();
        node.children = children;
        id
    }

    pub fn root(&self) -> &TreeNode {
        &self.nodes[0]
    }

    pub fn node(&self, id: usize) -> &TreeNode {
        &self.nodes[id]
    }

    /// Ids of `id` and all nodes below it, in preorder.
    pub fn subtree(&self, id: usize) -> Vec<usize> {
        let mut out = vec![id];
        let mut k = 0;
        while k < out.len() {
            for c in &self.nodes[out[k]].children {
                if let Child::Node(d) = c {
                    out.push(*d);
                }
            }
            k += 1;
        }
        out.sort_unstable();
        out
    }

    /// Path of node ids from the root down to `id`.
    pub fn path(&self, id: usize) -> Vec<usize> {
        let mut p = vec![id];
        while let Some(parent) = self.nodes[*p.last().unwrap()].parent {
            p.push(parent);
        }
        p.reverse();
        p
    }

    /// Layer count: the dense root plus every level of splitting (at least one).
    pub fn layers(&self) -> usize {
        if !self.hierarchical {
            return 1;
        }
        fn splits(t: &SchurTree, id: usize) -> usize {
            let n = &t.nodes[id];
            if n.is_leaf() {
                0
            } else {
                1 + n.children.iter().map(|c| if let Child::Node(d) = c { splits(t, *d) } else { 0 }).max().unwrap_or(0)
            }
        }
        1 + splits(self, 1).max(1)
    }

    /// Shape for rank assignment.
    pub fn shape(&self) -> ShapeNode {
        fn go(t: &SchurTree, id: usize) -> ShapeNode {
            let n = &t.nodes[id];
            if n.is_leaf() {
                ShapeNode::leaf(n.blocks.clone())
            } else {
                ShapeNode {
                    blocks: n.blocks.clone(),
                    children: n.children.iter().map(|c| if let Child::Node(d) = c { go(t, *d) } else { unreachable!() }).collect(),
                }
            }
        }
        go(self, 0)
    }

    /// Sum of the band bounds of every non-root node (zero for a flat tree).
    pub fn band_bound(&self) -> usize {
        self.nodes
            .iter()
            .filter(|n| n.parent.is_some())
            .map(|n| band_bound(&n.groups.iter().map(|g| g.1).collect::<Vec<_>>()))
            .sum()
    }
}

/// Cut positions splitting `blocks` into `k` near-equal groups (remainder to
/// the leftmost groups); in weighted mode each cut moves within a small
/// window to the pair with the fewest local links.
fn choose_cuts(kkt: &BlockKkt, blocks: &Range<usize>, k: usize, weighted: bool) -> Vec<usize> {
    let n = blocks.len();
    let base = n / k;
    let extra = n % k;
    let mut cuts = Vec::with_capacity(k - 1);
    let mut end = blocks.start;
    for g in 0..k - 1 {
        end += base + usize::from(g < extra);
        cuts.push(end - 1);
    }
    if weighted {
        let window = (base / 4).max(1);
        let mut prev = blocks.start - 1;
        for g in 0..cuts.len() {
            let next_limit = if g + 1 < cuts.len() { cuts[g + 1] } else { blocks.end - 1 };
            let lo = cuts[g].saturating_sub(window).max(prev + 1);
            let hi = (cuts[g] + window).min(next_limit - 1).max(lo);
            let target = cuts[g];
            let best = (lo..=hi).min_by_key(|&p| (kkt.local_count(p), p.abs_diff(target), p)).unwrap_or(target);
            cuts[g] = best;
            prev = best;
        }
    }
    cuts
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problem::{generate, to_standard_form, GeneratorParams};
    use std::sync::Arc;

    fn kkt(n: usize, links: Vec<usize>) -> BlockKkt {
        let mut p = GeneratorParams::new(n, 1, 5);
        p.local_links = links;
        p.linking_vars = 2;
        p.global_links = if n >= 3 { 1 } else { 0 };
        let g = generate(&p).unwrap();
        BlockKkt::new(Arc::new(to_standard_form(&g.problem).unwrap()))
    }

    fn opts(layers: usize) -> HierarchyOptions {
        HierarchyOptions { layers, ..Default::default() }
    }

    #[test]
    fn one_layer_is_flat() {
        let k = kkt(4, vec![1; 3]);
        assert_eq!(SchurTree::hierarchical(&k, &opts(1)).unwrap(), SchurTree::flat(&k));
    }

    #[test]
    fn two_layers_split_into_sqrt_groups() {
        let k = kkt(9, vec![1; 8]);
        let t = SchurTree::hierarchical(&k, &opts(2)).unwrap();
        assert_eq!(t.layers(), 2);
        let top = t.node(1);
        assert_eq!(top.children.len(), 3);
        assert_eq!(top.groups.iter().map(|g| g.0).collect::<Vec<_>>(), vec![BorderGroup::Pair(3), BorderGroup::Pair(6)]);
        let leaf = t.node(2);
        assert_eq!(leaf.blocks, 1..4);
        assert_eq!(leaf.groups.len(), 2);
        // every pair owned exactly once
        let mut owned: Vec<usize> = t.nodes.iter().flat_map(|n| n.border.clone()).collect();
        owned.sort_unstable();
        assert_eq!(owned, (0..k.z0_dim()).collect::<Vec<_>>());
    }

    #[test]
    fn three_layers_and_remainder() {
        let k = kkt(27, vec![1; 26]);
        let t = SchurTree::hierarchical(&k, &opts(3)).unwrap();
        assert_eq!(t.layers(), 3);
        // 27 -> 5 groups of 6,6,5,5,5
        let sizes: Vec<usize> = t.node(1).children.iter().map(|c| if let Child::Node(d) = c { t.node(*d).blocks.len() } else { 0 }).collect();
        assert_eq!(sizes, vec![6, 6, 5, 5, 5]);
    }

    #[test]
    fn small_top_stays_leaf() {
        let k = kkt(2, vec![1]);
        let t = SchurTree::hierarchical(&k, &opts(3)).unwrap();
        assert_eq!(t.nodes.len(), 2);
        assert!(t.node(1).is_leaf());
        assert_eq!(t.layers(), 2);
    }

    #[test]
    fn explicit_and_weighted_cuts() {
        let k = kkt(8, vec![3, 3, 0, 3, 3, 3, 3]);
        let mut o = opts(2);
        o.partition = Some(vec![2, 5]);
        let t = SchurTree::hierarchical(&k, &o).unwrap();
        assert_eq!(t.node(1).groups.iter().map(|g| g.0).collect::<Vec<_>>(), vec![BorderGroup::Pair(2), BorderGroup::Pair(5)]);
        o.partition = Some(vec![5, 2]);
        assert!(SchurTree::hierarchical(&k, &o).is_err());
        let w = HierarchyOptions { layers: 2, weighted: true, ..Default::default() };
        let t = SchurTree::hierarchical(&k, &w).unwrap();
        assert!(t.node(1).groups.iter().any(|g| g.0 == BorderGroup::Pair(3)));
    }

    #[test]
    fn layer_cap() {
        let k = kkt(4, vec![1; 3]);
        assert!(SchurTree::hierarchical(&k, &opts(5)).is_err());
        assert!(SchurTree::hierarchical(&k, &opts(0)).is_err());
    }
}
