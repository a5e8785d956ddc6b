use super::{ArrowheadProblem, StandardArrowhead};

/// Linking-row label: local to the pair `(i, i+1)` or global.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum LinkLabel {
    Local(usize),
    Global,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinkClassification {
    pub num_blocks: usize,
    /// One label per linking row, in the problem's row order.
    pub labels: Vec<LinkLabel>,
    /// `local_counts[i - 1]` = number of rows local to `(i, i+1)`, `i = 1..N-1`.
    pub local_counts: Vec<usize>,
    pub global_count: usize,
    /// `permutation[k]` = original row placed at position `k`: locals grouped
    /// by pair in ascending order, then the globals.
    pub permutation: Vec<usize>,
}

impl LinkClassification {
    pub fn local_count(&self, pair: usize) -> usize {
        self.local_counts[pair - 1]
    }

    /// Original row indices local to `pair`, in ascending order.
    pub fn local_rows(&self, pair: usize) -> &[usize] {
        let start: usize = self.local_counts[..pair - 1].iter().sum();
        &self.permutation[start..start + self.local_counts[pair - 1]]
    }

    pub fn global_rows(&self) -> &[usize] {
        &self.permutation[self.permutation.len() - self.global_count..]
    }

    pub fn total_local(&self) -> usize {
        self.local_counts.iter().sum()
    }
}

/// Label for a row whose support over blocks `1..=N` is `support` (sorted, unique).
///
/// A row touching a single block `j` is attached to the pair `(j, j+1)`,
/// or `(N-1, N)` for the last block; with a single block there are no pairs
/// and the row is global.
pub fn label_for_support(support: &[usize], num_blocks: usize) -> LinkLabel {
    match support {
        [j] if num_blocks >= 2 => LinkLabel::Local((*j).min(num_blocks - 1)),
        [a, b] if *b == *a + 1 => LinkLabel::Local(*a),
        _ => LinkLabel::Global,
    }
}

/// Classifies the linking rows of a problem: equality rows (`F`) first, then
/// inequality rows (`G`), matching the row order of its standard form.
pub fn classify_problem(p: &ArrowheadProblem) -> LinkClassification {
    let n = p.num_blocks();
    let (me, mi) = (p.link_meq(), p.link_mineq());
    let mut support: Vec<Vec<usize>> = vec![Vec::new(); me + mi];
    for i in 1..=n {
        let b = &p.blocks[i];
        for &(r, _, _) in &b.f.entries {
            push_unique(&mut support[r], i);
        }
        for &(r, _, _) in &b.g.entries {
            push_unique(&mut support[me + r], i);
        }
    }
    let labels: Vec<LinkLabel> = support.iter().map(|s| label_for_support(s, n)).collect();
    from_labels(n, labels)
}

fn push_unique(s: &mut Vec<usize>, i: usize) {
    // entries are visited block by block, so the last element suffices
    if s.last() != Some(&i) {
        s.push(i);
    }
}

fn from_labels(num_blocks: usize, labels: Vec<LinkLabel>) -> LinkClassification {
    let mut local_counts = vec![0; num_blocks.saturating_sub(1)];
    let mut global_count = 0;
    for l in &labels {
        match l {
            LinkLabel::Local(i) => local_counts[i - 1] += 1,
            LinkLabel::Global => global_count += 1,
        }
    }
    let mut permutation: Vec<usize> = (0..labels.len()).collect();
    permutation.sort_by_key(|&r| (labels[r], r));
    LinkClassification { num_blocks, labels, local_counts, global_count, permutation }
}

/// Classifies the linking rows of a standard-form problem.
pub fn classify_links(s: &StandardArrowhead) -> LinkClassification {
    classify_problem(&s.problem)
}
