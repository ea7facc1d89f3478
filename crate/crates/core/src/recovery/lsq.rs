use super::{RecoveryError, SensingOperator};
use crate::linalg::{DenseMatrix, IncrementalQr};

/// Minimizes `||y - A_S c||` by Householder QR.
pub fn least_squares(a_s: &DenseMatrix, y: &[f64]) -> Result<Vec<f64>, RecoveryError> {
    if y.len() != a_s.nrows() {
        return Err(RecoveryError::DimensionMismatch {
            expected: a_s.nrows(),
            actual: y.len(),
        });
    }
    if a_s.ncols() > a_s.nrows() {
        return Err(RecoveryError::RankDeficient {
            column: a_s.nrows(),
        });
    }
    let mut qr = IncrementalQr::new(y);
    for j in 0..a_s.ncols() {
        if !qr.push(a_s.column(j)) {
            return Err(RecoveryError::RankDeficient { column: j });
        }
    }
    Ok(qr.coefficients())
}

/// Least squares restricted to the columns `support` of `a`.
pub fn least_squares_on<A: SensingOperator + ?Sized>(
    a: &A,
    support: &[usize],
    y: &[f64],
) -> Result<Vec<f64>, RecoveryError> {
    Ok(factor_support(a, support, y)?.coefficients())
}

pub(crate) fn factor_support<A: SensingOperator + ?Sized>(
    a: &A,
    support: &[usize],
    y: &[f64],
) -> Result<IncrementalQr, RecoveryError> {
    let mut qr = IncrementalQr::new(y);
    for &j in support {
        if !qr.push(&a.column(j)) {
            return Err(RecoveryError::RankDeficient { column: j });
        }
    }
    Ok(qr)
}
