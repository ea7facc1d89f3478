use serde::{Deserialize, Serialize};

use super::lsq::factor_support;
use super::{check_measurements, top_k_indices, RecoveryError, RecoveryOutput, SensingOperator};
use crate::linalg::{norm2, sub, IncrementalQr};

/// Residuals below this fraction of `||y||` count as exact fits.
const EXACT_FIT: f64 = 1e-12;

fn check_sparsity(k: usize, limit: usize) -> Result<(), RecoveryError> {
    if k > limit {
        return Err(RecoveryError::InvalidSparsity { k, limit });
    }
    Ok(())
}

fn scatter(n: usize, support: &[usize], coeffs: &[f64]) -> Vec<f64> {
    let mut x = vec![0.0; n];
    for (&j, &c) in support.iter().zip(coeffs) {
        x[j] = c;
    }
    x
}

/// Orthogonal matching pursuit with exactly `k` selections.
///
/// Each step adds the column most correlated with the residual (lowest index
/// on ties) and re-projects `y` onto the selected columns. Stops early only
/// when the residual vanishes.
pub fn omp<A: SensingOperator + ?Sized>(
    a: &A,
    y: &[f64],
    k: usize,
) -> Result<RecoveryOutput, RecoveryError> {
    check_sparsity(k, a.nrows())?;
    omp_core(a, y, k, EXACT_FIT, true)
}

/// Orthogonal matching pursuit driven by the residual: selects columns until
/// `||r|| <= tol ||y||` or `max_iters` columns are selected.
pub fn omp_residual<A: SensingOperator + ?Sized>(
    a: &A,
    y: &[f64],
    tol: f64,
    max_iters: usize,
) -> Result<RecoveryOutput, RecoveryError> {
    check_sparsity(max_iters, a.nrows())?;
    omp_core(a, y, max_iters, tol, false)
}

/// Default relative residual at which [`omp_residual`] stops.
pub const OMP_RESIDUAL_TOL: f64 = 1e-10;

/// Stopping rule for OMP inside experiments.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "rule", content = "tol")]
pub enum OmpStop {
    /// Exactly `k` selections.
    Sparsity,
    /// Until the relative residual drops below `tol`, at most `M` selections.
    Residual(f64),
    /// `Residual(tol)` on noiseless measurements, `Sparsity` otherwise.
    Auto(f64),
}

impl Default for OmpStop {
    fn default() -> Self {
        OmpStop::Auto(OMP_RESIDUAL_TOL)
    }
}

fn omp_core<A: SensingOperator + ?Sized>(
    a: &A,
    y: &[f64],
    max_sel: usize,
    tol: f64,
    full_count_converges: bool,
) -> Result<RecoveryOutput, RecoveryError> {
    check_measurements(a, y)?;
    let n = a.ncols();
    let max_sel = max_sel.min(n);
    let y_norm = norm2(y);
    let mut selected = Vec::with_capacity(max_sel);
    let mut taken = vec![false; n];
    let mut qr = IncrementalQr::new(y);
    let mut residual = y.to_vec();
    let mut residual_norm = y_norm;
    let mut converged = residual_norm <= tol * y_norm || (full_count_converges && max_sel == 0);
    while !converged && selected.len() < max_sel {
        let corr = a.apply_transpose(&residual);
        let mut best: Option<(usize, f64)> = None;
        for (j, c) in corr.iter().enumerate() {
            if !taken[j] && best.is_none_or(|(_, b)| c.abs() > b) {
                best = Some((j, c.abs()));
            }
        }
        let Some((j, _)) = best else { break };
        if !qr.push(&a.column(j)) {
            return Err(RecoveryError::RankDeficient { column: j });
        }
        taken[j] = true;
        selected.push(j);
        let coeffs = qr.coefficients();
        residual = sub(y, &a.apply_support(&selected, &coeffs));
        residual_norm = norm2(&residual);
        if residual_norm <= tol * y_norm || (full_count_converges && selected.len() == max_sel) {
            converged = true;
        }
    }
    let iterations = selected.len();
    let coeffs = qr.coefficients();
    let x_hat = scatter(n, &selected, &coeffs);
    Ok(RecoveryOutput::new(a, y, x_hat, iterations, converged))
}

/// Largest eigenvalue of `A'A` by power iteration.
pub fn spectral_norm_sq<A: SensingOperator + ?Sized>(a: &A, iterations: usize) -> f64 {
    let n = a.ncols();
    // fixed, slightly non-uniform start so results are reproducible
    let mut v: Vec<f64> = (0..n).map(|i| 1.0 + 0.01 * ((i % 7) as f64)).collect();
    let mut lambda = 0.0;
    for _ in 0..iterations {
        let norm = norm2(&v);
        if norm == 0.0 {
            return 0.0;
        }
        v.iter_mut().for_each(|x| *x /= norm);
        let w = a.apply_transpose(&a.apply(&v));
        lambda = v.iter().zip(&w).map(|(p, q)| p * q).sum();
        v = w;
    }
    lambda
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "mode", content = "value")]
pub enum StepMode {
    /// `eta = 1 / sigma_max(A)^2`, estimated by power iteration.
    Normalized,
    Fixed(f64),
    /// Per-iteration step `||g_S||^2 / ||A g_S||^2` on the current support,
    /// shrunk when the support changes and the step is too long.
    Adaptive,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IhtParams {
    pub max_iters: usize,
    pub step: StepMode,
    /// Stop once the residual norm changes by less than this fraction.
    pub stall_tol: f64,
    pub power_iters: usize,
}

impl Default for IhtParams {
    fn default() -> Self {
        IhtParams {
            max_iters: 1000,
            step: StepMode::Adaptive,
            stall_tol: 1e-6,
            power_iters: 100,
        }
    }
}

impl IhtParams {
    pub fn step_size<A: SensingOperator + ?Sized>(&self, a: &A) -> f64 {
        match self.step {
            StepMode::Fixed(eta) => eta,
            StepMode::Normalized | StepMode::Adaptive => {
                let s = spectral_norm_sq(a, self.power_iters);
                if s > 0.0 {
                    1.0 / s
                } else {
                    1.0
                }
            }
        }
    }
}

/// Iterative hard thresholding `x <- H_k(x + eta A'(y - A x))` from `x = 0`.
pub fn iht<A: SensingOperator + ?Sized>(
    a: &A,
    y: &[f64],
    k: usize,
    params: &IhtParams,
) -> Result<RecoveryOutput, RecoveryError> {
    if params.step == StepMode::Adaptive {
        return iht_adaptive(a, y, k, params);
    }
    let eta = params.step_size(a);
    iht_with_step(a, y, k, params, eta)
}

fn hard_threshold(v: &mut [f64], k: usize) -> Vec<usize> {
    let keep = top_k_indices(v, k, &[]);
    let mut kept = vec![false; v.len()];
    for &i in &keep {
        kept[i] = true;
    }
    for (i, x) in v.iter_mut().enumerate() {
        if !kept[i] {
            *x = 0.0;
        }
    }
    keep
}

/// Shrink factor and acceptance margin for the adaptive step.
const ADAPTIVE_SHRINK: f64 = 2.0;
const ADAPTIVE_MARGIN: f64 = 0.01;
const ADAPTIVE_MAX_SHRINKS: usize = 60;

fn iht_adaptive<A: SensingOperator + ?Sized>(
    a: &A,
    y: &[f64],
    k: usize,
    params: &IhtParams,
) -> Result<RecoveryOutput, RecoveryError> {
    check_measurements(a, y)?;
    check_sparsity(k, a.nrows())?;
    let n = a.ncols();
    let y_norm = norm2(y);
    let mut x = vec![0.0; n];
    let mut residual = y.to_vec();
    let mut residual_norm = y_norm;
    let mut converged = false;
    let mut iterations = 0;
    let mut support = top_k_indices(&a.apply_transpose(y), k, &[]);
    while iterations < params.max_iters.max(1) {
        let grad = a.apply_transpose(&residual);
        let mut g_s = vec![0.0; n];
        for &j in &support {
            g_s[j] = grad[j];
        }
        let num: f64 = support.iter().map(|&j| grad[j] * grad[j]).sum();
        let den = norm2(&a.apply(&g_s)).powi(2);
        let mut mu = if num > 0.0 && den > 0.0 { num / den } else { 1.0 };
        let mut shrinks = 0;
        let (proposal, keep) = loop {
            let mut p: Vec<f64> = x.iter().zip(&grad).map(|(xi, g)| xi + mu * g).collect();
            let mut keep = hard_threshold(&mut p, k);
            keep.sort_unstable();
            if keep == support || shrinks >= ADAPTIVE_MAX_SHRINKS {
                break (p, keep);
            }
            let diff = sub(&p, &x);
            let step_sq = norm2(&diff).powi(2);
            let image_sq = norm2(&a.apply(&diff)).powi(2);
            if image_sq == 0.0 || mu <= (1.0 - ADAPTIVE_MARGIN) * step_sq / image_sq {
                break (p, keep);
            }
            mu /= ADAPTIVE_SHRINK * (1.0 - ADAPTIVE_MARGIN);
            shrinks += 1;
        };
        x = proposal;
        support = keep;
        iterations += 1;
        residual = sub(y, &a.apply(&x));
        let new_norm = norm2(&residual);
        let stalled = (residual_norm - new_norm).abs() < params.stall_tol * residual_norm;
        residual_norm = new_norm;
        if residual_norm <= EXACT_FIT * y_norm || stalled {
            converged = true;
            break;
        }
    }
    Ok(RecoveryOutput::new(a, y, x, iterations, converged))
}

pub(crate) fn iht_with_step<A: SensingOperator + ?Sized>(
    a: &A,
    y: &[f64],
    k: usize,
    params: &IhtParams,
    eta: f64,
) -> Result<RecoveryOutput, RecoveryError> {
    check_measurements(a, y)?;
    check_sparsity(k, a.nrows())?;
    let n = a.ncols();
    let y_norm = norm2(y);
    let mut x = vec![0.0; n];
    let mut residual = y.to_vec();
    let mut residual_norm = y_norm;
    let mut converged = false;
    let mut iterations = 0;
    while iterations < params.max_iters.max(1) {
        let grad = a.apply_transpose(&residual);
        let mut proposal: Vec<f64> = x.iter().zip(&grad).map(|(xi, g)| xi + eta * g).collect();
        hard_threshold(&mut proposal, k);
        x = proposal;
        iterations += 1;
        residual = sub(y, &a.apply(&x));
        let new_norm = norm2(&residual);
        let stalled = (residual_norm - new_norm).abs() < params.stall_tol * residual_norm;
        residual_norm = new_norm;
        if residual_norm <= EXACT_FIT * y_norm || stalled {
            converged = true;
            break;
        }
    }
    Ok(RecoveryOutput::new(a, y, x, iterations, converged))
}

/// Subspace pursuit.
///
/// Starts from the `k` largest entries of `A'y`; each iteration merges in the
/// `k` columns most correlated with the residual, solves least squares on the
/// union, prunes to the `k` largest coefficients and re-solves. A candidate is
/// accepted only if it lowers the residual norm.
pub fn sp<A: SensingOperator + ?Sized>(
    a: &A,
    y: &[f64],
    k: usize,
    max_iters: usize,
) -> Result<RecoveryOutput, RecoveryError> {
    check_measurements(a, y)?;
    check_sparsity(2 * k, a.nrows())?;
    let n = a.ncols();
    let y_norm = norm2(y);
    if k == 0 || y_norm == 0.0 {
        return Ok(RecoveryOutput::new(a, y, vec![0.0; n], 0, true));
    }
    let mut support = top_k_indices(&a.apply_transpose(y), k, &[]);
    let qr = factor_support(a, &support, y)?;
    let mut coeffs = qr.coefficients();
    let mut residual_norm = qr.residual_norm();
    let mut iterations = 0;
    let mut converged = residual_norm <= EXACT_FIT * y_norm;
    while !converged && iterations < max_iters {
        let residual = sub(y, &a.apply_support(&support, &coeffs));
        let corr = a.apply_transpose(&residual);
        let mut in_support = vec![false; n];
        for &j in &support {
            in_support[j] = true;
        }
        let extra = top_k_indices(&corr, k, &in_support);
        let mut merged = support.clone();
        merged.extend(extra);
        merged.sort_unstable();
        let wide = factor_support(a, &merged, y)?.coefficients();
        let mut dense = vec![0.0; n];
        for (&j, &c) in merged.iter().zip(&wide) {
            dense[j] = c;
        }
        let mut outside = vec![true; n];
        for &j in &merged {
            outside[j] = false;
        }
        let candidate = top_k_indices(&dense, k, &outside);
        let qr = factor_support(a, &candidate, y)?;
        let cand_norm = qr.residual_norm();
        if cand_norm >= residual_norm {
            converged = true;
            break;
        }
        iterations += 1;
        support = candidate;
        coeffs = qr.coefficients();
        residual_norm = cand_norm;
        if residual_norm <= EXACT_FIT * y_norm {
            converged = true;
        }
    }
    let x_hat = scatter(n, &support, &coeffs);
    Ok(RecoveryOutput::new(a, y, x_hat, iterations, converged))
}
