//! Small dense linear algebra: column-major matrices, Cholesky, and an
//! incrementally grown Householder QR used by the least-squares kernel.

use serde::{Deserialize, Serialize};

/// Column-major dense matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DenseMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl DenseMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        DenseMatrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut a = Self::zeros(n, n);
        for i in 0..n {
            a[(i, i)] = 1.0;
        }
        a
    }

    pub fn from_col_major(rows: usize, cols: usize, data: Vec<f64>) -> Self {
        assert_eq!(data.len(), rows * cols, "data length mismatch");
        DenseMatrix { rows, cols, data }
    }

    pub fn from_row_major(rows: usize, cols: usize, data: &[f64]) -> Self {
        assert_eq!(data.len(), rows * cols, "data length mismatch");
        let mut a = Self::zeros(rows, cols);
        for i in 0..rows {
            for j in 0..cols {
                a[(i, j)] = data[i * cols + j];
            }
        }
        a
    }

    pub fn from_columns(rows: usize, columns: &[Vec<f64>]) -> Self {
        let mut data = Vec::with_capacity(rows * columns.len());
        for c in columns {
            assert_eq!(c.len(), rows, "column length mismatch");
            data.extend_from_slice(c);
        }
        DenseMatrix {
            rows,
            cols: columns.len(),
            data,
        }
    }

    pub fn nrows(&self) -> usize {
        self.rows
    }

    pub fn ncols(&self) -> usize {
        self.cols
    }

    pub fn column(&self, j: usize) -> &[f64] {
        &self.data[j * self.rows..(j + 1) * self.rows]
    }

    pub fn column_mut(&mut self, j: usize) -> &mut [f64] {
        &mut self.data[j * self.rows..(j + 1) * self.rows]
    }

    pub fn as_col_major(&self) -> &[f64] {
        &self.data
    }

    pub fn transpose(&self) -> DenseMatrix {
        let mut t = DenseMatrix::zeros(self.cols, self.rows);
        for j in 0..self.cols {
            for i in 0..self.rows {
                t[(j, i)] = self[(i, j)];
            }
        }
        t
    }

    /// `y = A x`
    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.rows];
        for (j, &xj) in x.iter().enumerate() {
            if xj != 0.0 {
                axpy(xj, self.column(j), &mut y);
            }
        }
        y
    }

    /// `A' r`
    pub fn tr_mul_vec(&self, r: &[f64]) -> Vec<f64> {
        (0..self.cols).map(|j| dot(self.column(j), r)).collect()
    }

    pub fn matmul(&self, other: &DenseMatrix) -> DenseMatrix {
        assert_eq!(self.cols, other.rows);
        let mut out = DenseMatrix::zeros(self.rows, other.cols);
        for j in 0..other.cols {
            let col = self.mul_vec(other.column(j));
            out.column_mut(j).copy_from_slice(&col);
        }
        out
    }

    pub fn max_asymmetry(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for i in 0..self.rows {
            for j in (i + 1)..self.cols.min(self.rows) {
                worst = worst.max((self[(i, j)] - self[(j, i)]).abs());
            }
        }
        worst
    }
}

impl std::ops::Index<(usize, usize)> for DenseMatrix {
    type Output = f64;
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.data[j * self.rows + i]
    }
}

impl std::ops::IndexMut<(usize, usize)> for DenseMatrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.data[j * self.rows + i]
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// `y += alpha * x`
pub fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

pub fn sub(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

/// Lower-triangular Cholesky factor of a symmetric positive definite matrix.
#[derive(Debug, Clone)]
pub struct Cholesky {
    n: usize,
    // row-major lower triangle, full storage
    l: Vec<f64>,
}

impl Cholesky {
    /// Returns `None` if the matrix is not numerically positive definite.
    pub fn new(a: &DenseMatrix) -> Option<Self> {
        let n = a.nrows();
        let mut l = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..=i {
                let mut s = a[(i, j)];
                for p in 0..j {
                    s -= l[i * n + p] * l[j * n + p];
                }
                if i == j {
                    if s <= 0.0 || !s.is_finite() {
                        return None;
                    }
                    l[i * n + i] = s.sqrt();
                } else {
                    l[i * n + j] = s / l[j * n + j];
                }
            }
        }
        Some(Cholesky { n, l })
    }

    /// Solves `A x = b` in place.
    pub fn solve_in_place(&self, b: &mut [f64]) {
        let n = self.n;
        for i in 0..n {
            let mut s = b[i];
            for p in 0..i {
                s -= self.l[i * n + p] * b[p];
            }
            b[i] = s / self.l[i * n + i];
        }
        for i in (0..n).rev() {
            let mut s = b[i];
            for p in (i + 1)..n {
                s -= self.l[p * n + i] * b[p];
            }
            b[i] = s / self.l[i * n + i];
        }
    }
}

/// Householder QR of a column block that grows one column at a time.
///
/// Keeps `Q' y` for a fixed right-hand side so that the least-squares
/// coefficients and residual norm are available after every append.
#[derive(Debug, Clone)]
pub struct IncrementalQr {
    rows: usize,
    // reflector vectors v_j (length rows, zero above j), with beta_j
    reflectors: Vec<Vec<f64>>,
    betas: Vec<f64>,
    // column-major upper triangle: r[j] holds R[0..=j, j]
    r: Vec<Vec<f64>>,
    qty: Vec<f64>,
    col_scale: f64,
}

/// Relative pivot size below which an appended column counts as dependent.
pub const RANK_TOL: f64 = 1e-10;

impl IncrementalQr {
    pub fn new(y: &[f64]) -> Self {
        IncrementalQr {
            rows: y.len(),
            reflectors: Vec::new(),
            betas: Vec::new(),
            r: Vec::new(),
            qty: y.to_vec(),
            col_scale: 0.0,
        }
    }

    pub fn len(&self) -> usize {
        self.r.len()
    }

    pub fn is_empty(&self) -> bool {
        self.r.is_empty()
    }

    /// Appends a column. Returns `false` (leaving the factorization
    /// unchanged) if it is numerically dependent on the current ones.
    pub fn push(&mut self, column: &[f64]) -> bool {
        let k = self.len();
        if k >= self.rows {
            return false;
        }
        let mut w = column.to_vec();
        for (v, &beta) in self.reflectors.iter().zip(&self.betas) {
            apply_reflector(v, beta, &mut w);
        }
        let col_norm = norm2(column);
        let tail_norm = norm2(&w[k..]);
        self.col_scale = self.col_scale.max(col_norm);
        if tail_norm <= RANK_TOL * col_norm.max(f64::MIN_POSITIVE) || col_norm == 0.0 {
            return false;
        }
        // reflector mapping w[k..] to (alpha, 0, ..., 0)
        let alpha = if w[k] >= 0.0 { -tail_norm } else { tail_norm };
        let mut v = vec![0.0; self.rows];
        v[k] = w[k] - alpha;
        v[(k + 1)..].copy_from_slice(&w[(k + 1)..]);
        let vnorm2 = dot(&v[k..], &v[k..]);
        let beta = if vnorm2 > 0.0 { 2.0 / vnorm2 } else { 0.0 };
        let mut rcol = w[..k].to_vec();
        rcol.push(alpha);
        apply_reflector(&v, beta, &mut self.qty);
        self.reflectors.push(v);
        self.betas.push(beta);
        self.r.push(rcol);
        true
    }

    /// Least-squares coefficients for the current column block.
    pub fn coefficients(&self) -> Vec<f64> {
        let k = self.len();
        let mut c = self.qty[..k].to_vec();
        for i in (0..k).rev() {
            let mut s = c[i];
            for j in (i + 1)..k {
                s -= self.r[j][i] * c[j];
            }
            c[i] = s / self.r[i][i];
        }
        c
    }

    /// `||y - A_S c||` for the optimal `c`.
    pub fn residual_norm(&self) -> f64 {
        norm2(&self.qty[self.len()..])
    }
}

fn apply_reflector(v: &[f64], beta: f64, w: &mut [f64]) {
    if beta == 0.0 {
        return;
    }
    let s = beta * dot(v, w);
    axpy(-s, v, w);
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cholesky_solves() {
        let a = DenseMatrix::from_row_major(3, 3, &[4.0, 2.0, 0.6, 2.0, 5.0, 1.0, 0.6, 1.0, 3.0]);
        let ch = Cholesky::new(&a).unwrap();
        let x = vec![1.0, -2.0, 0.5];
        let mut b = a.mul_vec(&x);
        ch.solve_in_place(&mut b);
        for (u, v) in b.iter().zip(&x) {
            assert!((u - v).abs() < 1e-12);
        }
        let singular = DenseMatrix::from_row_major(2, 2, &[1.0, 1.0, 1.0, 1.0]);
        assert!(Cholesky::new(&singular).is_none());
    }

    #[test]
    fn qr_rejects_dependent_column() {
        let y = vec![1.0, 2.0, 3.0];
        let mut qr = IncrementalQr::new(&y);
        assert!(qr.push(&[1.0, 0.0, 1.0]));
        assert!(!qr.push(&[2.0, 0.0, 2.0]));
        assert!(qr.push(&[0.0, 1.0, 0.0]));
        assert_eq!(qr.len(), 2);
        assert!(!qr.push(&[0.0, 0.0, 0.0]));
    }

    #[test]
    fn transpose_and_matmul() {
        let a = DenseMatrix::from_row_major(2, 3, &[1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
        let at = a.transpose();
        assert_eq!(at[(2, 1)], 6.0);
        let g = at.matmul(&a);
        assert_eq!(g[(0, 0)], 17.0);
        assert_eq!(g.max_asymmetry(), 0.0);
        assert_eq!(a.tr_mul_vec(&[1.0, 1.0]), vec![5.0, 7.0, 9.0]);
    }
}
