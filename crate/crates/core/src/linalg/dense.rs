use super::{Inertia, LinalgError};

/// Row-major dense matrix.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct DenseMatrix {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl DenseMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![0.0; rows * cols] }
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Self {
        let r = rows.len();
        let c = rows.first().map_or(0, Vec::len);
        Self { rows: r, cols: c, data: rows.iter().flatten().copied().collect() }
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.cols + j] = v;
    }

    #[inline]
    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.cols + j] += v;
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn mul(&self, x: &[f64]) -> Vec<f64> {
        (0..self.rows).map(|i| self.row(i).iter().zip(x).map(|(a, b)| a * b).sum()).collect()
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        (0..self.rows).map(|i| self.row(i).to_vec()).collect()
    }

    pub fn is_symmetric(&self) -> bool {
        self.rows == self.cols && (0..self.rows).all(|i| (0..i).all(|j| self.get(i, j) == self.get(j, i)))
    }

    fn swap_sym(&mut self, a: usize, b: usize) {
        if a == b {
            return;
        }
        let n = self.cols;
        for j in 0..n {
            self.data.swap(a * n + j, b * n + j);
        }
        for i in 0..self.rows {
            self.data.swap(i * n + a, i * n + b);
        }
    }
}

#[derive(Debug, Clone)]
enum Block {
    One(f64),
    Two([f64; 3]),
}

/// Dense Bunch-Kaufman `P A P^T = L D L^T` for symmetric indefinite matrices.
#[derive(Debug, Clone)]
pub struct DenseLdlt {
    n: usize,
    /// unit lower factor, stored row-major below the diagonal
    l: DenseMatrix,
    /// `perm[k]` = original index at position `k`
    perm: Vec<usize>,
    blocks: Vec<(usize, Block)>,
    inertia: Inertia,
}

impl DenseLdlt {
    pub fn factor(a: &DenseMatrix) -> Result<Self, LinalgError> {
        if a.rows != a.cols {
            return Err(LinalgError::Dimension { expected: a.rows, got: a.cols });
        }
        let n = a.rows;
        let alpha = (1.0 + 17f64.sqrt()) / 8.0;
        let mut w = a.clone();
        let mut perm: Vec<usize> = (0..n).collect();
        let mut blocks = Vec::new();
        let mut inertia = Inertia::default();
        let mut k = 0;
        while k < n {
            let akk = w.get(k, k);
            let (mut colmax, mut r) = (0.0f64, k);
            for i in k + 1..n {
                let v = w.get(i, k).abs();
                if v > colmax {
                    colmax = v;
                    r = i;
                }
            }
            if !akk.is_finite() || !colmax.is_finite() {
                return Err(LinalgError::Singular { pivot: perm[k] });
            }
            if akk == 0.0 && colmax == 0.0 {
                return Err(LinalgError::Singular { pivot: perm[k] });
            }
            let two = if akk.abs() >= alpha * colmax {
                false
            } else {
                let mut rowmax = 0.0f64;
                for j in k..n {
                    if j != r {
                        rowmax = rowmax.max(w.get(r, j).abs());
                    }
                }
                if akk.abs() * rowmax >= alpha * colmax * colmax {
                    false
                } else if w.get(r, r).abs() >= alpha * rowmax {
                    w.swap_sym(k, r);
                    perm.swap(k, r);
                    false
                } else {
                    w.swap_sym(k + 1, r);
                    perm.swap(k + 1, r);
                    true
                }
            };
            if !two {
                let d = w.get(k, k);
                if d == 0.0 {
                    return Err(LinalgError::Singular { pivot: perm[k] });
                }
                for i in k + 1..n {
                    let li = w.get(i, k) / d;
                    if li != 0.0 {
                        for j in k + 1..=i {
                            let v = w.get(i, j) - li * w.get(j, k);
                            w.set(i, j, v);
                        }
                    }
                }
                for i in k + 1..n {
                    let li = w.get(i, k) / d;
                    w.set(i, k, li);
                }
                // refresh the upper triangle of the trailing block
                mirror_trailing(&mut w, k + 1);
                if d > 0.0 { inertia.positive += 1 } else { inertia.negative += 1 }
                blocks.push((k, Block::One(d)));
                k += 1;
            } else {
                let (d11, d21, d22) = (w.get(k, k), w.get(k + 1, k), w.get(k + 1, k + 1));
                let det = d11 * d22 - d21 * d21;
                if det == 0.0 || !det.is_finite() {
                    return Err(LinalgError::Singular { pivot: perm[k] });
                }
                let mut ls = Vec::with_capacity(n - k - 2);
                for i in k + 2..n {
                    let (a, b) = (w.get(i, k), w.get(i, k + 1));
                    ls.push(((a * d22 - b * d21) / det, (b * d11 - a * d21) / det));
                }
                for i in k + 2..n {
                    let (lp, lr) = ls[i - k - 2];
                    for j in k + 2..=i {
                        let v = w.get(i, j) - lp * w.get(j, k) - lr * w.get(j, k + 1);
                        w.set(i, j, v);
                    }
                }
                for i in k + 2..n {
                    let (lp, lr) = ls[i - k - 2];
                    w.set(i, k, lp);
                    w.set(i, k + 1, lr);
                }
                w.set(k + 1, k, 0.0);
                mirror_trailing(&mut w, k + 2);
                if det < 0.0 {
                    inertia.positive += 1;
                    inertia.negative += 1;
                } else if d11 + d22 > 0.0 {
                    inertia.positive += 2;
                } else {
                    inertia.negative += 2;
                }
                blocks.push((k, Block::Two([d11, d21, d22])));
                k += 2;
            }
        }
        Ok(Self { n, l: w, perm, blocks, inertia })
    }

    pub fn order(&self) -> usize {
        self.n
    }

    pub fn inertia(&self) -> Inertia {
        self.inertia
    }

    pub fn solve_in_place(&self, b: &mut [f64]) {
        let n = self.n;
        let mut y: Vec<f64> = self.perm.iter().map(|&p| b[p]).collect();
        for i in 0..n {
            let row = &self.l.data[i * n..i * n + i];
            let mut s = y[i];
            for (j, &l) in row.iter().enumerate() {
                s -= l * y[j];
            }
            y[i] = s;
        }
        for (k, blk) in &self.blocks {
            match blk {
                Block::One(d) => y[*k] /= d,
                Block::Two([d11, d21, d22]) => {
                    let det = d11 * d22 - d21 * d21;
                    let (a, c) = (y[*k], y[k + 1]);
                    y[*k] = (d22 * a - d21 * c) / det;
                    y[k + 1] = (d11 * c - d21 * a) / det;
                }
            }
        }
        for i in (0..n).rev() {
            let yi = y[i];
            if yi != 0.0 {
                for j in 0..i {
                    y[j] -= self.l.data[i * n + j] * yi;
                }
            }
        }
        for (k, &p) in self.perm.iter().enumerate() {
            b[p] = y[k];
        }
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let mut x = b.to_vec();
        self.solve_in_place(&mut x);
        x
    }
}

/// Copies the lower triangle of the trailing block `from..` into its upper triangle.
fn mirror_trailing(w: &mut DenseMatrix, from: usize) {
    let n = w.rows;
    for i in from..n {
        for j in from..i {
            let v = w.get(i, j);
            w.set(j, i, v);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn empty_matrix_factors() {
        let f = DenseLdlt::factor(&DenseMatrix::zeros(0, 0)).unwrap();
        assert_eq!(f.solve(&[]), Vec::<f64>::new());
    }

    #[test]
    fn random_indefinite_systems() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for trial in 0..30 {
            let n = rng.gen_range(1..25);
            let mut a = DenseMatrix::zeros(n, n);
            for i in 0..n {
                for j in 0..=i {
                    let v = if trial % 3 == 0 && i == j { 0.0 } else { rng.gen_range(-1.0..1.0) };
                    a.set(i, j, v);
                    a.set(j, i, v);
                }
            }
            let b: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let f = DenseLdlt::factor(&a).unwrap();
            let x = f.solve(&b);
            let r = a.mul(&x).iter().zip(&b).map(|(u, v)| (u - v).abs()).fold(0.0, f64::max);
            assert!(r < 1e-8, "trial {trial}: residual {r}");
            let i = f.inertia();
            assert_eq!(i.positive + i.negative, n);
        }
    }

    #[test]
    fn singular_reports_pivot() {
        let a = DenseMatrix::from_rows(&[vec![1.0, 0.0], vec![0.0, 0.0]]);
        assert_eq!(DenseLdlt::factor(&a).unwrap_err(), LinalgError::Singular { pivot: 1 });
    }
}
