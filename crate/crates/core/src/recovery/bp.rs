use serde::{Deserialize, Serialize};

use super::{check_measurements, RecoveryError, RecoveryOutput, SensingOperator};
use crate::linalg::{norm2, Cholesky};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BpParams {
    /// Augmented Lagrangian penalty.
    pub rho: f64,
    /// Over-relaxation factor.
    pub alpha: f64,
    pub tol: f64,
    pub max_iters: usize,
}

impl Default for BpParams {
    fn default() -> Self {
        BpParams {
            rho: 1.0,
            alpha: 1.0,
            tol: 1e-6,
            max_iters: 2000,
        }
    }
}

/// Basis pursuit `min ||x||_1 s.t. A x = y` by ADMM, with the projection
/// onto `{x : A x = y}` factored once per matrix.
pub struct BpSolver<'a, A: SensingOperator + ?Sized> {
    a: &'a A,
    chol: Cholesky,
}

impl<'a, A: SensingOperator + ?Sized> BpSolver<'a, A> {
    pub fn new(a: &'a A) -> Self {
        let mut g = a.outer_gram();
        let m = a.nrows();
        // rank-deficient A A' (e.g. empty rows) gets a tiny ridge; the
        // constraint stays consistent because y lies in the range of A
        let chol = Cholesky::new(&g).unwrap_or_else(|| {
            let scale = (0..m).map(|i| g[(i, i)]).fold(0.0, f64::max).max(1.0);
            for i in 0..m {
                g[(i, i)] += 1e-10 * scale;
            }
            Cholesky::new(&g).expect("ridge-regularized Gram matrix is positive definite")
        });
        BpSolver { a, chol }
    }

    /// `v - A'(AA')^{-1}(A v - y)`
    fn project(&self, v: &[f64], y: &[f64]) -> Vec<f64> {
        let mut w: Vec<f64> = self.a.apply(v).iter().zip(y).map(|(p, q)| p - q).collect();
        self.chol.solve_in_place(&mut w);
        let corr = self.a.apply_transpose(&w);
        v.iter().zip(&corr).map(|(p, q)| p - q).collect()
    }

    pub fn solve(&self, y: &[f64], params: &BpParams) -> Result<RecoveryOutput, RecoveryError> {
        check_measurements(self.a, y)?;
        let n = self.a.ncols();
        let sqrt_n = (n as f64).sqrt();
        let threshold = 1.0 / params.rho;
        let mut z = vec![0.0; n];
        let mut u = vec![0.0; n];
        let mut converged = false;
        let mut iterations = 0;
        let mut v = vec![0.0; n];
        while iterations < params.max_iters {
            iterations += 1;
            for i in 0..n {
                v[i] = z[i] - u[i];
            }
            let x = self.project(&v, y);
            let z_old = std::mem::take(&mut z);
            z = Vec::with_capacity(n);
            let mut r_sq = 0.0;
            let mut s_sq = 0.0;
            for i in 0..n {
                let x_rel = params.alpha * x[i] + (1.0 - params.alpha) * z_old[i];
                let zi = soft_threshold(x_rel + u[i], threshold);
                u[i] += x_rel - zi;
                r_sq += (x[i] - zi) * (x[i] - zi);
                s_sq += (zi - z_old[i]) * (zi - z_old[i]);
                z.push(zi);
            }
            let r_norm = r_sq.sqrt();
            let s_norm = params.rho * s_sq.sqrt();
            let eps_pri = sqrt_n * params.tol + params.tol * norm2(&x).max(norm2(&z));
            let eps_dual = sqrt_n * params.tol + params.tol * params.rho * norm2(&u);
            if r_norm < eps_pri && s_norm < eps_dual {
                converged = true;
                break;
            }
        }
        Ok(RecoveryOutput::new(self.a, y, z, iterations, converged))
    }
}

fn soft_threshold(v: f64, t: f64) -> f64 {
    if v > t {
        v - t
    } else if v < -t {
        v + t
    } else {
        0.0
    }
}

pub fn bp<A: SensingOperator + ?Sized>(
    a: &A,
    y: &[f64],
    params: &BpParams,
) -> Result<RecoveryOutput, RecoveryError> {
    BpSolver::new(a).solve(y, params)
}
