use super::CscMatrix;

/// Number of right-hand sides solved together.
const PANEL: usize = 64;

/// Computes `L^T K^{-1} L` over the nonzero columns of `L`.
///
/// `solve` overwrites each right-hand side with `K^{-1} b`. Columns are
/// processed in panels of at most 64; only the lower triangle `(i >= j)` is
/// returned, as `(i, j, value)` in column indices of `L`, sorted by `(j, i)`.
pub fn schur_contribution(l: &CscMatrix, mut solve: impl FnMut(&mut [Vec<f64>])) -> Vec<(usize, usize, f64)> {
    let cols = l.nonzero_cols();
    let mut out = Vec::new();
    for panel in cols.chunks(PANEL.min(cols.len().max(1))) {
        let mut rhs: Vec<Vec<f64>> = panel
            .iter()
            .map(|&j| {
                let mut v = vec![0.0; l.nrows];
                for (i, x) in l.col(j) {
                    v[i] = x;
                }
                v
            })
            .collect();
        solve(&mut rhs);
        for (&j, w) in panel.iter().zip(&rhs) {
            for &i in cols.iter().filter(|&&i| i >= j) {
                let v: f64 = l.col(i).map(|(r, x)| x * w[r]).sum();
                out.push((i, j, v));
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{DenseLdlt, DenseMatrix};

    #[test]
    fn matches_explicit_product() {
        let k = DenseMatrix::from_rows(&[vec![-2.0, 1.0, 0.0], vec![1.0, -3.0, 1.0], vec![0.0, 1.0, 1.0]]);
        let f = DenseLdlt::factor(&k).unwrap();
        // columns 0 and 2 of L are nonzero, column 1 is empty
        let l = CscMatrix::from_triplets(3, 3, &[(0, 0, 1.0), (2, 0, 2.0), (1, 2, -1.0), (2, 2, 0.5)]);
        let s = schur_contribution(&l, |b| b.iter_mut().for_each(|x| f.solve_in_place(x)));
        assert_eq!(s.iter().map(|e| (e.0, e.1)).collect::<Vec<_>>(), vec![(0, 0), (2, 0), (2, 2)]);
        let kinv_l0 = f.solve(&[1.0, 0.0, 2.0]);
        let expect = -kinv_l0[1] + 0.5 * kinv_l0[2];
        assert!((s[1].2 - expect).abs() < 1e-14);
    }
}
