use std::collections::{BTreeMap, BTreeSet};
use std::ops::Range;

use thiserror::Error;

/// Shape of a block hierarchy for rank assignment. A node without
/// `children` is a leaf whose children are the individual blocks in `blocks`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ShapeNode {
    /// Half-open range of block ids (1-based).
    pub blocks: Range<usize>,
    pub children: Vec<ShapeNode>,
}

impl ShapeNode {
    pub fn leaf(blocks: Range<usize>) -> Self {
        Self { blocks, children: Vec::new() }
    }

    pub fn num_blocks(&self) -> usize {
        self.blocks.len()
    }

    fn preorder<'a>(&'a self, out: &mut Vec<&'a ShapeNode>) {
        out.push(self);
        for c in &self.children {
            c.preorder(out);
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Assignment {
    pub num_ranks: usize,
    /// `block_owner[b - 1]` = rank owning block `b`.
    pub block_owner: Vec<usize>,
    /// Rank set of every node, in preorder.
    pub node_ranks: Vec<Vec<usize>>,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AssignError {
    #[error("rank count {ranks} must be between 1 and the number of blocks {blocks}")]
    RankCount { ranks: usize, blocks: usize },
    #[error("invalid assignment: {0}")]
    Invalid(String),
}

/// Owners for `n` items over `ranks` ranks in contiguous runs, the remainder
/// going to the lowest ranks.
pub fn contiguous_owners(n: usize, ranks: usize) -> Vec<usize> {
    let base = n / ranks;
    let extra = n % ranks;
    let mut out = Vec::with_capacity(n);
    for r in 0..ranks {
        let take = base + usize::from(r < extra);
        out.extend(std::iter::repeat_n(r, take));
    }
    out
}

/// Splits `total` ranks over children of the given weights: each share lies
/// in `1..=weight`, proportional to the weight, largest remainder first.
fn proportional_shares(weights: &[usize], total: usize) -> Vec<usize> {
    let w: usize = weights.iter().sum();
    let exact: Vec<f64> = weights.iter().map(|&x| x as f64 * total as f64 / w as f64).collect();
    let mut share: Vec<usize> = exact.iter().zip(weights).map(|(&e, &cap)| (e.floor() as usize).clamp(1, cap)).collect();
    let mut sum: usize = share.iter().sum();
    while sum < total {
        let j = (0..share.len())
            .filter(|&j| share[j] < weights[j])
            .max_by(|&a, &b| (exact[a] - share[a] as f64).total_cmp(&(exact[b] - share[b] as f64)).then(b.cmp(&a)))
            .expect("capacity available");
        share[j] += 1;
        sum += 1;
    }
    while sum > total {
        let j = (0..share.len())
            .filter(|&j| share[j] > 1)
            .min_by(|&a, &b| (exact[a] - share[a] as f64).total_cmp(&(exact[b] - share[b] as f64)).then(b.cmp(&a)))
            .expect("reducible share");
        share[j] -= 1;
        sum -= 1;
    }
    share
}

/// Assigns ranks top-down: the root owns all ranks; a node with at least as
/// many ranks as children splits them contiguously in proportion to the
/// children's block counts, otherwise each rank takes a contiguous group of
/// whole children. Within a leaf, blocks are distributed contiguously.
pub fn assign_ranks(shape: &ShapeNode, num_ranks: usize) -> Result<Assignment, AssignError> {
    let n = shape.num_blocks();
    if num_ranks == 0 || num_ranks > n {
        return Err(AssignError::RankCount { ranks: num_ranks, blocks: n });
    }
    let mut out = Assignment { num_ranks, block_owner: vec![usize::MAX; shape.blocks.end - 1], node_ranks: Vec::new() };
    visit(shape, (0..num_ranks).collect(), &mut out);
    Ok(out)
}

fn visit(node: &ShapeNode, ranks: Vec<usize>, out: &mut Assignment) {
    out.node_ranks.push(ranks.clone());
    if node.children.is_empty() {
        let owners = contiguous_owners(node.num_blocks(), ranks.len());
        for (k, b) in node.blocks.clone().enumerate() {
            out.block_owner[b - 1] = ranks[owners[k]];
        }
        return;
    }
    let k = node.children.len();
    if ranks.len() >= k {
        let weights: Vec<usize> = node.children.iter().map(ShapeNode::num_blocks).collect();
        let shares = proportional_shares(&weights, ranks.len());
        let mut start = 0;
        for (c, s) in node.children.iter().zip(shares) {
            visit(c, ranks[start..start + s].to_vec(), out);
            start += s;
        }
    } else {
        let owners = contiguous_owners(k, ranks.len());
        for (c, &o) in node.children.iter().zip(&owners) {
            visit(c, vec![ranks[o]], out);
        }
    }
}

/// Checks an assignment independently of how it was built: every block has
/// an owner inside each enclosing node's rank set, node rank sets are the
/// union of their children's, and a rank appearing in several systems of
/// one layer sees the same rank set in all of them.
pub fn check_assignment(shape: &ShapeNode, a: &Assignment) -> Result<(), AssignError> {
    let bad = |m: String| Err(AssignError::Invalid(m));
    let mut nodes = Vec::new();
    shape.preorder(&mut nodes);
    if nodes.len() != a.node_ranks.len() {
        return bad(format!("{} nodes but {} rank sets", nodes.len(), a.node_ranks.len()));
    }
    let mut used = BTreeSet::new();
    for b in shape.blocks.clone() {
        let o = a.block_owner[b - 1];
        if o >= a.num_ranks {
            return bad(format!("block {b} has no valid owner"));
        }
        used.insert(o);
    }
    if used.len() != a.num_ranks {
        return bad(format!("only {} of {} ranks own blocks", used.len(), a.num_ranks));
    }
    // systems per layer: (rank set) for every child system at that depth
    let mut layers: BTreeMap<usize, Vec<BTreeSet<usize>>> = BTreeMap::new();
    let mut idx = 0;
    check_node(shape, a, &mut idx, 1, &mut layers)?;
    for (depth, systems) in layers {
        let mut seen: BTreeMap<usize, &BTreeSet<usize>> = BTreeMap::new();
        for s in &systems {
            for &r in s {
                if let Some(prev) = seen.insert(r, s) {
                    if prev != s {
                        return bad(format!("rank {r} sits in systems with different rank sets at layer {depth}"));
                    }
                }
            }
        }
    }
    Ok(())
}

fn check_node(
    node: &ShapeNode,
    a: &Assignment,
    idx: &mut usize,
    depth: usize,
    layers: &mut BTreeMap<usize, Vec<BTreeSet<usize>>>,
) -> Result<BTreeSet<usize>, AssignError> {
    let mine: BTreeSet<usize> = a.node_ranks[*idx].iter().copied().collect();
    *idx += 1;
    let mut union = BTreeSet::new();
    if node.children.is_empty() {
        for b in node.blocks.clone() {
            let s: BTreeSet<usize> = [a.block_owner[b - 1]].into();
            union.extend(&s);
            layers.entry(depth).or_default().push(s);
        }
    } else {
        for c in &node.children {
            let s = check_node(c, a, idx, depth + 1, layers)?;
            union.extend(&s);
            layers.entry(depth).or_default().push(s);
        }
    }
    if union != mine {
        return Err(AssignError::Invalid(format!(
            "node over blocks {:?} has ranks {:?} but its children use {:?}",
            node.blocks, mine, union
        )));
    }
    Ok(mine)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_level(n: usize, groups: usize) -> ShapeNode {
        let owners = contiguous_owners(n, groups);
        let children = (0..groups)
            .map(|g| {
                let lo = owners.iter().position(|&o| o == g).unwrap() + 1;
                let hi = owners.iter().rposition(|&o| o == g).unwrap() + 2;
                ShapeNode::leaf(lo..hi)
            })
            .collect();
        ShapeNode { blocks: 1..n + 1, children }
    }

    #[test]
    fn contiguous_remainder_to_low_ranks() {
        assert_eq!(contiguous_owners(7, 3), vec![0, 0, 0, 1, 1, 2, 2]);
    }

    #[test]
    fn identity_when_ranks_equal_blocks() {
        let shape = two_level(9, 3);
        let a = assign_ranks(&shape, 9).unwrap();
        assert_eq!(a.block_owner, (0..9).collect::<Vec<_>>());
        check_assignment(&shape, &a).unwrap();
    }

    #[test]
    fn every_grid_point_checks() {
        for n in 1..=20 {
            for g in 1..=n.min(5) {
                let shape = if g == 1 { ShapeNode::leaf(1..n + 1) } else { two_level(n, g) };
                for r in 1..=n {
                    let a = assign_ranks(&shape, r).unwrap();
                    check_assignment(&shape, &a).unwrap_or_else(|e| panic!("n={n} g={g} r={r}: {e}"));
                }
            }
        }
    }

    #[test]
    fn too_many_ranks_rejected() {
        assert!(assign_ranks(&ShapeNode::leaf(1..4), 4).is_err());
        assert!(assign_ranks(&ShapeNode::leaf(1..4), 0).is_err());
    }

    #[test]
    fn checker_rejects_split_rank() {
        let shape = two_level(4, 2);
        // rank 1 appears in both children with different partners
        let a = Assignment { num_ranks: 3, block_owner: vec![0, 1, 1, 2], node_ranks: vec![vec![0, 1, 2], vec![0, 1], vec![1, 2]] };
        assert!(check_assignment(&shape, &a).is_err());
    }
}
