//! Sparse recovery solvers and the matrix access they share.
//!
//! Every solver works through [`SensingOperator`], implemented both for
//! support-form binary matrices and for dense matrices.

mod bp;
mod greedy;
mod lsq;

pub use bp::{bp, BpParams, BpSolver};
pub use greedy::{iht, omp, omp_residual, sp, spectral_norm_sq, IhtParams, OmpStop, StepMode, OMP_RESIDUAL_TOL};
pub use lsq::{least_squares, least_squares_on};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::{norm2, sub, DenseMatrix};
use crate::matrix::{MatrixError, SensingMatrix};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RecoveryError {
    #[error("columns are linearly dependent (rejected column {column})")]
    RankDeficient { column: usize },
    #[error("sparsity {k} exceeds the solver limit {limit}")]
    InvalidSparsity { k: usize, limit: usize },
    #[error("expected a vector of length {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },
    #[error("invalid signal: {0}")]
    InvalidSignal(String),
}

/// Column access needed by the solvers.
pub trait SensingOperator: Sync {
    fn nrows(&self) -> usize;
    fn ncols(&self) -> usize;
    /// `A x`
    fn apply(&self, x: &[f64]) -> Vec<f64>;
    /// `A' r`
    fn apply_transpose(&self, r: &[f64]) -> Vec<f64>;
    /// Dense copy of column `j`.
    fn column(&self, j: usize) -> Vec<f64>;

    /// `A_S c` for coefficients `c` on the columns `support`.
    fn apply_support(&self, support: &[usize], coeffs: &[f64]) -> Vec<f64> {
        let mut x = vec![0.0; self.ncols()];
        for (&j, &c) in support.iter().zip(coeffs) {
            x[j] = c;
        }
        self.apply(&x)
    }

    /// `A A'` as a dense `M x M` matrix.
    fn outer_gram(&self) -> DenseMatrix {
        let m = self.nrows();
        let mut g = DenseMatrix::zeros(m, m);
        for j in 0..self.ncols() {
            let c = self.column(j);
            for q in 0..m {
                if c[q] == 0.0 {
                    continue;
                }
                for p in 0..m {
                    g[(p, q)] += c[p] * c[q];
                }
            }
        }
        g
    }
}

impl SensingOperator for SensingMatrix {
    fn nrows(&self) -> usize {
        SensingMatrix::nrows(self)
    }

    fn ncols(&self) -> usize {
        SensingMatrix::ncols(self)
    }

    fn apply(&self, x: &[f64]) -> Vec<f64> {
        let amp = self.amplitude();
        let mut y = vec![0.0; SensingMatrix::nrows(self)];
        for (j, &xj) in x.iter().enumerate() {
            if xj != 0.0 {
                let v = amp * xj;
                for &r in self.support(j) {
                    y[r] += v;
                }
            }
        }
        y
    }

    fn apply_transpose(&self, r: &[f64]) -> Vec<f64> {
        let amp = self.amplitude();
        self.supports()
            .iter()
            .map(|s| amp * s.iter().map(|&i| r[i]).sum::<f64>())
            .collect()
    }

    fn column(&self, j: usize) -> Vec<f64> {
        let mut c = vec![0.0; SensingMatrix::nrows(self)];
        let amp = self.amplitude();
        for &r in self.support(j) {
            c[r] = amp;
        }
        c
    }

    fn apply_support(&self, support: &[usize], coeffs: &[f64]) -> Vec<f64> {
        let amp = self.amplitude();
        let mut y = vec![0.0; SensingMatrix::nrows(self)];
        for (&j, &c) in support.iter().zip(coeffs) {
            for &r in self.support(j) {
                y[r] += amp * c;
            }
        }
        y
    }

    fn outer_gram(&self) -> DenseMatrix {
        let m = SensingMatrix::nrows(self);
        let w = 1.0 / self.degree() as f64;
        let mut g = DenseMatrix::zeros(m, m);
        for s in self.supports() {
            for &p in s {
                for &q in s {
                    g[(p, q)] += w;
                }
            }
        }
        g
    }
}

impl SensingOperator for DenseMatrix {
    fn nrows(&self) -> usize {
        DenseMatrix::nrows(self)
    }

    fn ncols(&self) -> usize {
        DenseMatrix::ncols(self)
    }

    fn apply(&self, x: &[f64]) -> Vec<f64> {
        self.mul_vec(x)
    }

    fn apply_transpose(&self, r: &[f64]) -> Vec<f64> {
        self.tr_mul_vec(r)
    }

    fn column(&self, j: usize) -> Vec<f64> {
        DenseMatrix::column(self, j).to_vec()
    }

    fn apply_support(&self, support: &[usize], coeffs: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; DenseMatrix::nrows(self)];
        for (&j, &c) in support.iter().zip(coeffs) {
            crate::linalg::axpy(c, DenseMatrix::column(self, j), &mut y);
        }
        y
    }
}

/// Either kind of matrix the experiments use.
#[derive(Debug, Clone)]
pub enum Operator {
    Binary(SensingMatrix),
    Dense(DenseMatrix),
}

impl Operator {
    /// Binary matrices use the support format; dense ones are written as
    /// `dense M N` followed by `M` rows of `N` values.
    pub fn to_text(&self) -> String {
        match self {
            Operator::Binary(a) => a.to_text(),
            Operator::Dense(a) => {
                let mut out = format!("dense {} {}\n", a.nrows(), a.ncols());
                for i in 0..a.nrows() {
                    let row: Vec<String> = (0..a.ncols()).map(|j| a[(i, j)].to_string()).collect();
                    out.push_str(&row.join(" "));
                    out.push('\n');
                }
                out
            }
        }
    }

    pub fn from_text(text: &str) -> Result<Self, MatrixError> {
        let is_dense = text
            .lines()
            .next()
            .and_then(|l| l.split_whitespace().next())
            .is_some_and(|t| t == "dense");
        if !is_dense {
            return SensingMatrix::from_text(text).map(Operator::Binary);
        }
        let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));
        let (_, header) = lines.next().expect("checked above");
        let dims: Vec<usize> = header
            .split_whitespace()
            .skip(1)
            .map(|t| t.parse())
            .collect::<Result<_, _>>()
            .map_err(|_| MatrixError::Parse {
                line: 1,
                message: "expected `dense M N`".into(),
            })?;
        let [m, n] = dims[..] else {
            return Err(MatrixError::Parse {
                line: 1,
                message: "expected `dense M N`".into(),
            });
        };
        let mut data = Vec::with_capacity(m * n);
        let mut rows = 0;
        for (lno, line) in lines {
            if line.trim().is_empty() {
                continue;
            }
            let vals: Vec<f64> = line
                .split_whitespace()
                .map(|t| t.parse::<f64>())
                .collect::<Result<_, _>>()
                .map_err(|e| MatrixError::Parse {
                    line: lno,
                    message: e.to_string(),
                })?;
            if vals.len() != n || vals.iter().any(|v| !v.is_finite()) {
                return Err(MatrixError::Parse {
                    line: lno,
                    message: format!("expected {n} finite values"),
                });
            }
            data.extend(vals);
            rows += 1;
        }
        if rows != m {
            return Err(MatrixError::InconsistentHeader(format!(
                "declared {m} rows but found {rows}"
            )));
        }
        Ok(Operator::Dense(DenseMatrix::from_row_major(m, n, &data)))
    }

    pub fn read(path: impl AsRef<std::path::Path>) -> Result<Self, MatrixError> {
        Self::from_text(&std::fs::read_to_string(path)?)
    }
}

impl SensingOperator for Operator {
    fn nrows(&self) -> usize {
        match self {
            Operator::Binary(a) => SensingMatrix::nrows(a),
            Operator::Dense(a) => DenseMatrix::nrows(a),
        }
    }

    fn ncols(&self) -> usize {
        match self {
            Operator::Binary(a) => SensingMatrix::ncols(a),
            Operator::Dense(a) => DenseMatrix::ncols(a),
        }
    }

    fn apply(&self, x: &[f64]) -> Vec<f64> {
        match self {
            Operator::Binary(a) => a.apply(x),
            Operator::Dense(a) => a.apply(x),
        }
    }

    fn apply_transpose(&self, r: &[f64]) -> Vec<f64> {
        match self {
            Operator::Binary(a) => a.apply_transpose(r),
            Operator::Dense(a) => a.apply_transpose(r),
        }
    }

    fn column(&self, j: usize) -> Vec<f64> {
        match self {
            Operator::Binary(a) => SensingOperator::column(a, j),
            Operator::Dense(a) => SensingOperator::column(a, j),
        }
    }

    fn apply_support(&self, support: &[usize], coeffs: &[f64]) -> Vec<f64> {
        match self {
            Operator::Binary(a) => a.apply_support(support, coeffs),
            Operator::Dense(a) => a.apply_support(support, coeffs),
        }
    }

    fn outer_gram(&self) -> DenseMatrix {
        match self {
            Operator::Binary(a) => a.outer_gram(),
            Operator::Dense(a) => a.outer_gram(),
        }
    }
}

/// A `k`-sparse vector given by its support and the values there.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SparseSignal {
    n: usize,
    support: Vec<usize>,
    values: Vec<f64>,
}

impl SparseSignal {
    pub fn new(n: usize, support: Vec<usize>, values: Vec<f64>) -> Result<Self, RecoveryError> {
        if support.len() != values.len() {
            return Err(RecoveryError::InvalidSignal(format!(
                "{} indices but {} values",
                support.len(),
                values.len()
            )));
        }
        if support.len() > n {
            return Err(RecoveryError::InvalidSignal(format!(
                "support of size {} exceeds dimension {n}",
                support.len()
            )));
        }
        let mut pairs: Vec<(usize, f64)> = support.into_iter().zip(values).collect();
        pairs.sort_by_key(|p| p.0);
        if pairs.windows(2).any(|w| w[0].0 == w[1].0) {
            return Err(RecoveryError::InvalidSignal("repeated support index".into()));
        }
        if let Some(&(i, _)) = pairs.iter().find(|p| p.0 >= n) {
            return Err(RecoveryError::InvalidSignal(format!(
                "index {i} out of range for dimension {n}"
            )));
        }
        if pairs.iter().any(|p| !p.1.is_finite() || p.1 == 0.0) {
            return Err(RecoveryError::InvalidSignal(
                "values must be finite and nonzero".into(),
            ));
        }
        let (support, values) = pairs.into_iter().unzip();
        Ok(SparseSignal { n, support, values })
    }

    pub fn dimension(&self) -> usize {
        self.n
    }

    pub fn sparsity(&self) -> usize {
        self.support.len()
    }

    pub fn support(&self) -> &[usize] {
        &self.support
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn to_dense(&self) -> Vec<f64> {
        let mut x = vec![0.0; self.n];
        for (&i, &v) in self.support.iter().zip(&self.values) {
            x[i] = v;
        }
        x
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecoveryOutput {
    pub x_hat: Vec<f64>,
    pub iterations: usize,
    /// `||y - A x_hat||`, recomputed from `x_hat`.
    pub final_residual_norm: f64,
    pub converged: bool,
}

impl RecoveryOutput {
    pub(crate) fn new<A: SensingOperator + ?Sized>(
        a: &A,
        y: &[f64],
        x_hat: Vec<f64>,
        iterations: usize,
        converged: bool,
    ) -> Self {
        let final_residual_norm = norm2(&sub(y, &a.apply(&x_hat)));
        RecoveryOutput {
            x_hat,
            iterations,
            final_residual_norm,
            converged,
        }
    }

    pub fn support(&self) -> Vec<usize> {
        (0..self.x_hat.len()).filter(|&i| self.x_hat[i] != 0.0).collect()
    }
}

/// `||x_hat - x|| / ||x||` (absolute error when `x = 0`).
pub fn relative_error(x_hat: &[f64], x: &[f64]) -> f64 {
    let err = norm2(&sub(x_hat, x));
    let scale = norm2(x);
    if scale > 0.0 {
        err / scale
    } else {
        err
    }
}

pub(crate) fn check_measurements<A: SensingOperator + ?Sized>(
    a: &A,
    y: &[f64],
) -> Result<(), RecoveryError> {
    if y.len() != a.nrows() {
        return Err(RecoveryError::DimensionMismatch {
            expected: a.nrows(),
            actual: y.len(),
        });
    }
    Ok(())
}

/// Indices of the `k` largest `|v|`, ties to the lower index, ascending.
pub(crate) fn top_k_indices(v: &[f64], k: usize, exclude: &[bool]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..v.len()).filter(|&i| !exclude.get(i).copied().unwrap_or(false)).collect();
    let k = k.min(idx.len());
    let order = |&a: &usize, &b: &usize| v[b].abs().total_cmp(&v[a].abs()).then(a.cmp(&b));
    if k < idx.len() {
        idx.select_nth_unstable_by(k, order);
        idx.truncate(k);
    }
    idx.sort_unstable();
    idx
}
