use std::ops::Range;
use std::sync::Arc;

use crate::kkt::Regularization;
use crate::linalg::{minimum_degree, CscMatrix, DenseMatrix, SymTriplets};
use crate::problem::{classify_links, LinkClassification, StandardArrowhead};

/// Block view of the augmented system `[[Sigma, A^T], [A, 0]]`.
///
/// Unknowns are ordered `z = (z_1, .., z_N, z_0)` with `z_i = (x_i, y_i)`
/// and `z_0 = (local links grouped by pair, global links, x_0, y_0)`. The
/// matrix is block-diagonal in the `K_i` plus the border `L_i` coupling each
/// `z_i` to `z_0` and the corner over `z_0`.
#[derive(Debug, Clone)]
pub struct BlockKkt {
    std: Arc<StandardArrowhead>,
    classes: LinkClassification,
    n_blocks: usize,
    nvar: Vec<usize>,
    neq: Vec<usize>,
    z_off: Vec<usize>,
    z0_base: usize,
    link_pos: Vec<usize>,
    pair_off: Vec<usize>,
    m_local: usize,
    m_global: usize,
    /// `B_i` entries as lower-triangle triplets in `z_i` coordinates.
    k_offdiag: Vec<Vec<(usize, usize, f64)>>,
    k_order: Vec<Vec<usize>>,
    borders: Vec<CscMatrix>,
    /// constant off-diagonal corner entries, lower triangle, `z_0` coordinates
    corner_offdiag: Vec<(usize, usize, f64)>,
}

impl BlockKkt {
    pub fn new(std: Arc<StandardArrowhead>) -> Self {
        let classes = classify_links(&std);
        let p = &std.problem;
        let n = p.num_blocks();
        let nvar: Vec<usize> = p.blocks.iter().map(|b| b.nvar()).collect();
        let neq: Vec<usize> = p.blocks.iter().map(|b| b.meq()).collect();
        let mut z_off = vec![0; n + 2];
        for j in 1..=n {
            z_off[j + 1] = z_off[j] + nvar[j] + neq[j];
        }
        let z0_base = z_off[n + 1];
        let mut link_pos = vec![0; classes.labels.len()];
        for (k, &r) in classes.permutation.iter().enumerate() {
            link_pos[r] = k;
        }
        let mut pair_off = vec![0; n.max(1)];
        for q in 1..n {
            pair_off[q] = pair_off[q - 1] + classes.local_counts[q - 1];
        }
        let m_local = classes.total_local();
        let m_global = classes.global_count;
        let m_link = m_local + m_global;
        let x0 = m_link;
        let y0 = m_link + nvar[0];

        let mut k_offdiag = vec![Vec::new(); n + 1];
        let mut k_order = vec![Vec::new(); n + 1];
        let mut borders = vec![CscMatrix::default(); n + 1];
        let z0_dim = m_link + nvar[0] + neq[0];
        for j in 1..=n {
            let b = &p.blocks[j];
            let nj = nvar[j];
            k_offdiag[j] = b.b.entries.iter().map(|&(r, c, v)| (nj + r, c, v)).collect();
            let mut pattern = SymTriplets::new(nj + neq[j]);
            for d in 0..nj + neq[j] {
                pattern.push(d, d, 1.0);
            }
            pattern.entries.extend(k_offdiag[j].iter().copied());
            k_order[j] = minimum_degree(&pattern.adjacency());
            let mut t: Vec<(usize, usize, f64)> = b.f.entries.iter().map(|&(r, c, v)| (c, link_pos[r], v)).collect();
            t.extend(b.a.entries.iter().map(|&(r, c, v)| (nj + r, x0 + c, v)));
            borders[j] = CscMatrix::from_triplets(nj + neq[j], z0_dim, &t);
        }
        let b0 = &p.blocks[0];
        let mut corner_offdiag: Vec<(usize, usize, f64)> = b0.f.entries.iter().map(|&(r, c, v)| (x0 + c, link_pos[r], v)).collect();
        corner_offdiag.extend(b0.a.entries.iter().map(|&(r, c, v)| (y0 + r, x0 + c, v)));

        Self {
            std,
            classes,
            n_blocks: n,
            nvar,
            neq,
            z_off,
            z0_base,
            link_pos,
            pair_off,
            m_local,
            m_global,
            k_offdiag,
            k_order,
            borders,
            corner_offdiag,
        }
    }

    pub fn standard(&self) -> &Arc<StandardArrowhead> {
        &self.std
    }

    pub fn classification(&self) -> &LinkClassification {
        &self.classes
    }

    pub fn num_blocks(&self) -> usize {
        self.n_blocks
    }

    /// Order of `K_j`.
    pub fn block_dim(&self, j: usize) -> usize {
        self.nvar[j] + self.neq[j]
    }

    pub fn block_nvar(&self, j: usize) -> usize {
        self.nvar[j]
    }

    pub fn z_offset(&self, j: usize) -> usize {
        self.z_off[j]
    }

    pub fn z0_base(&self) -> usize {
        self.z0_base
    }

    pub fn z0_dim(&self) -> usize {
        self.m_local + self.m_global + self.nvar[0] + self.neq[0]
    }

    pub fn total_dim(&self) -> usize {
        self.z0_base + self.z0_dim()
    }

    pub fn local_count(&self, pair: usize) -> usize {
        self.classes.local_counts[pair - 1]
    }

    pub fn global_count(&self) -> usize {
        self.m_global
    }

    pub fn n0(&self) -> usize {
        self.nvar[0]
    }

    pub fn m0(&self) -> usize {
        self.neq[0]
    }

    /// `z_0` indices of the rows local to `pair`.
    pub fn pair_range(&self, pair: usize) -> Range<usize> {
        let s = self.pair_off[pair - 1];
        s..s + self.classes.local_counts[pair - 1]
    }

    pub fn global_range(&self) -> Range<usize> {
        self.m_local..self.m_local + self.m_global
    }

    pub fn x0_range(&self) -> Range<usize> {
        let s = self.m_local + self.m_global;
        s..s + self.nvar[0]
    }

    pub fn y0_range(&self) -> Range<usize> {
        let s = self.m_local + self.m_global + self.nvar[0];
        s..s + self.neq[0]
    }

    /// `z_0` index of each original linking row.
    pub fn link_positions(&self) -> &[usize] {
        &self.link_pos
    }

    /// Cached fill-reducing order for `K_j`.
    pub fn block_order(&self, j: usize) -> &[usize] {
        &self.k_order[j]
    }

    /// `L_j`: rows in `z_j`, columns in `z_0`.
    pub fn border(&self, j: usize) -> &CscMatrix {
        &self.borders[j]
    }

    /// Constant off-diagonal entries of the corner (lower triangle, `z_0` indices).
    pub fn corner_offdiag(&self) -> &[(usize, usize, f64)] {
        &self.corner_offdiag
    }

    /// `K_j = [[Sigma_j - eps_p I, B_j^T], [B_j, eps_d I]]` (lower triangle).
    pub fn block_matrix(&self, j: usize, sigma_j: &[f64], reg: Regularization) -> SymTriplets {
        let nj = self.nvar[j];
        let mut k = SymTriplets::new(nj + self.neq[j]);
        for (d, s) in sigma_j.iter().enumerate() {
            k.push(d, d, s - reg.primal);
        }
        for r in 0..self.neq[j] {
            k.push(nj + r, nj + r, reg.dual);
        }
        k.entries.extend(self.k_offdiag[j].iter().copied());
        k
    }

    /// The corner over all of `z_0` (lower triangle).
    pub fn corner_matrix(&self, sigma0: &[f64], reg: Regularization) -> SymTriplets {
        let mut k = SymTriplets::new(self.z0_dim());
        let m_link = self.m_local + self.m_global;
        for d in 0..m_link {
            k.push(d, d, reg.dual);
        }
        for (d, s) in sigma0.iter().enumerate() {
            k.push(m_link + d, m_link + d, s - reg.primal);
        }
        for r in self.y0_range() {
            k.push(r, r, reg.dual);
        }
        k.entries.extend(self.corner_offdiag.iter().copied());
        k
    }

    /// Per-block slices of a flat primal vector.
    pub fn split_sigma<'a>(&self, sigma: &'a [f64]) -> Vec<&'a [f64]> {
        let mut out = Vec::with_capacity(self.n_blocks + 1);
        let mut off = 0;
        for &n in &self.nvar {
            out.push(&sigma[off..off + n]);
            off += n;
        }
        out
    }

    /// Position in `z` of every index of the flat layout `(x_0, x_1, .., x_N, y_0, y_1, .., y_N, y_L)`.
    pub fn flat_to_z(&self) -> Vec<usize> {
        let n = self.n_blocks;
        let mut map = Vec::with_capacity(self.total_dim());
        let m_link = self.m_local + self.m_global;
        let base = self.z0_base;
        map.extend((0..self.nvar[0]).map(|k| base + m_link + k));
        for j in 1..=n {
            map.extend((0..self.nvar[j]).map(|k| self.z_off[j] + k));
        }
        map.extend((0..self.neq[0]).map(|r| base + m_link + self.nvar[0] + r));
        for j in 1..=n {
            map.extend((0..self.neq[j]).map(|r| self.z_off[j] + self.nvar[j] + r));
        }
        map.extend(self.link_pos.iter().map(|&p| base + p));
        map
    }

    /// Whole system in `z` order as lower-triangle triplets.
    pub fn z_matrix(&self, sigma: &[f64], reg: Regularization) -> SymTriplets {
        let parts = self.split_sigma(sigma);
        let mut out = SymTriplets::new(self.total_dim());
        for j in 1..=self.n_blocks {
            let o = self.z_off[j];
            for (r, c, v) in self.block_matrix(j, parts[j], reg).entries {
                out.entries.push((o + r, o + c, v));
            }
            let l = &self.borders[j];
            for c in 0..l.ncols {
                for (r, v) in l.col(c) {
                    out.entries.push((self.z0_base + c, o + r, v));
                }
            }
        }
        for (r, c, v) in self.corner_matrix(parts[0], reg).entries {
            out.entries.push((self.z0_base + r, self.z0_base + c, v));
        }
        out
    }

    /// Reassembles the full matrix in the flat (unpermuted) layout.
    pub fn to_dense(&self, sigma: &[f64], reg: Regularization) -> DenseMatrix {
        let map = self.flat_to_z();
        let mut inv = vec![0; map.len()];
        for (f, &z) in map.iter().enumerate() {
            inv[z] = f;
        }
        let n = map.len();
        let mut d = DenseMatrix::zeros(n, n);
        for (r, c, v) in self.z_matrix(sigma, reg).entries {
            let (a, b) = (inv[r], inv[c]);
            d.add(a, b, v);
            if a != b {
                d.add(b, a, v);
            }
        }
        d
    }
}
