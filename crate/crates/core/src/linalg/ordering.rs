use std::collections::{BTreeSet, HashSet};

/// Minimum-degree elimination order for a symmetric pattern given by
/// adjacency lists. Ties go to the smallest index, so the result depends
/// only on the pattern.
pub fn minimum_degree(adjacency: &[Vec<usize>]) -> Vec<usize> {
    let n = adjacency.len();
    let mut adj: Vec<HashSet<usize>> = adjacency.iter().map(|a| a.iter().copied().filter(|&j| j < n).collect()).collect();
    for (i, a) in adj.iter_mut().enumerate() {
        a.remove(&i);
    }
    let mut queue: BTreeSet<(usize, usize)> = (0..n).map(|i| (adj[i].len(), i)).collect();
    let mut order = Vec::with_capacity(n);
    while let Some((_, v)) = queue.pop_first() {
        order.push(v);
        let mut nbrs: Vec<usize> = adj[v].drain().collect();
        nbrs.sort_unstable();
        for &u in &nbrs {
            queue.remove(&(adj[u].len(), u));
            adj[u].remove(&v);
        }
        // eliminated vertex's neighbours form a clique
        for (k, &a) in nbrs.iter().enumerate() {
            for &b in &nbrs[k + 1..] {
                adj[a].insert(b);
                adj[b].insert(a);
            }
        }
        for &u in &nbrs {
            queue.insert((adj[u].len(), u));
        }
    }
    order
}
