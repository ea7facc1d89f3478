//! Numerical checks of the Gram-matrix eigenvalue bounds: a cyclic Jacobi
//! eigensolver, sampled restricted isometry estimates, and the proportion of
//! nonzero off-diagonal Gram entries.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::matrix::SensingMatrix;
use crate::rng::{derive_seed, rng_from_seed, sample_subset};
use crate::theory::{girth4_eigen_bounds, girth6_eigen_bounds, ratio_to_f64};

pub const DEFAULT_TOL: f64 = 1e-12;
pub const DEFAULT_MAX_SWEEPS: usize = 50;
/// Numeric slack allowed when certifying sampled eigenvalues against bounds.
pub const BOUND_SLACK: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SpectralError {
    #[error("matrix is not symmetric (max asymmetry {0:e})")]
    NotSymmetric(f64),
    #[error("matrix is empty or not square")]
    BadShape,
    #[error("subset size {k} exceeds {n} columns")]
    KTooLarge { k: usize, n: usize },
    #[error("subset size must be at least 1")]
    KZero,
    #[error("need at least one sample")]
    NoSamples,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EigenResult {
    pub lambda_max: f64,
    pub lambda_min: f64,
    /// All eigenvalues, ascending.
    pub eigenvalues: Vec<f64>,
    pub sweeps: usize,
    pub converged: bool,
}

/// Extreme eigenvalues of a symmetric matrix (row-major, `n x n`) by cyclic
/// Jacobi rotations, sweeping until every off-diagonal magnitude is below
/// `tol` or `max_sweeps` is exhausted.
pub fn extreme_eigenvalues(
    s: &[f64],
    n: usize,
    tol: f64,
    max_sweeps: usize,
) -> Result<EigenResult, SpectralError> {
    jacobi(s, n, tol, max_sweeps, |_| {})
}

/// Off-diagonal Frobenius norm after each completed sweep, for diagnostics.
pub fn jacobi_offdiag_history(
    s: &[f64],
    n: usize,
    tol: f64,
    max_sweeps: usize,
) -> Result<Vec<f64>, SpectralError> {
    let mut history = Vec::new();
    jacobi(s, n, tol, max_sweeps, |a| history.push(offdiag_norm(a, n)))?;
    Ok(history)
}

fn offdiag_norm(a: &[f64], n: usize) -> f64 {
    let mut s = 0.0;
    for i in 0..n {
        for j in 0..n {
            if i != j {
                s += a[i * n + j] * a[i * n + j];
            }
        }
    }
    s.sqrt()
}

fn max_offdiag(a: &[f64], n: usize) -> f64 {
    let mut m: f64 = 0.0;
    for i in 0..n {
        for j in (i + 1)..n {
            m = m.max(a[i * n + j].abs());
        }
    }
    m
}

fn jacobi(
    s: &[f64],
    n: usize,
    tol: f64,
    max_sweeps: usize,
    mut on_sweep: impl FnMut(&[f64]),
) -> Result<EigenResult, SpectralError> {
    if n == 0 || s.len() != n * n {
        return Err(SpectralError::BadShape);
    }
    let mut asym: f64 = 0.0;
    for i in 0..n {
        for j in (i + 1)..n {
            asym = asym.max((s[i * n + j] - s[j * n + i]).abs());
        }
    }
    if asym > tol {
        return Err(SpectralError::NotSymmetric(asym));
    }
    let mut a = s.to_vec();
    let mut sweeps = 0;
    let mut converged = max_offdiag(&a, n) < tol;
    while !converged && sweeps < max_sweeps {
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a[p * n + q];
                if apq == 0.0 {
                    continue;
                }
                let app = a[p * n + p];
                let aqq = a[q * n + q];
                let theta = (aqq - app) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let sn = t * c;
                for r in 0..n {
                    if r == p || r == q {
                        continue;
                    }
                    let arp = a[r * n + p];
                    let arq = a[r * n + q];
                    let new_rp = c * arp - sn * arq;
                    let new_rq = sn * arp + c * arq;
                    a[r * n + p] = new_rp;
                    a[p * n + r] = new_rp;
                    a[r * n + q] = new_rq;
                    a[q * n + r] = new_rq;
                }
                a[p * n + p] = app - t * apq;
                a[q * n + q] = aqq + t * apq;
                a[p * n + q] = 0.0;
                a[q * n + p] = 0.0;
            }
        }
        sweeps += 1;
        on_sweep(&a);
        converged = max_offdiag(&a, n) < tol;
    }
    let mut eigenvalues: Vec<f64> = (0..n).map(|i| a[i * n + i]).collect();
    eigenvalues.sort_by(f64::total_cmp);
    Ok(EigenResult {
        lambda_max: eigenvalues[n - 1],
        lambda_min: eigenvalues[0],
        eigenvalues,
        sweeps,
        converged,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundKind {
    /// Girth > 4: `1 - k/(2d) <= lambda <= (k + d - 1)/d`.
    GirthAboveFour,
    /// Girth 4 with coherence `s/d`.
    GirthFour { s: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EigenBounds {
    pub kind: BoundKind,
    pub lower: f64,
    pub upper: f64,
}

impl EigenBounds {
    /// Bounds applicable to `k`-column Gram blocks of `a`, chosen from its
    /// measured coherence.
    pub fn for_matrix(a: &SensingMatrix, k: usize) -> Option<Self> {
        let spectrum = a.correlation_spectrum();
        let (k, d, m) = (k as i64, a.degree() as i64, a.nrows() as i64);
        if !spectrum.has_four_cycles() {
            if d < 2 {
                return None;
            }
            let (lo, hi) = girth6_eigen_bounds(k, d);
            Some(EigenBounds {
                kind: BoundKind::GirthAboveFour,
                lower: ratio_to_f64(lo),
                upper: ratio_to_f64(hi),
            })
        } else {
            let s = spectrum.max_overlap;
            let (lo, hi) = girth4_eigen_bounds(k, d, s as i64, m);
            Some(EigenBounds {
                kind: BoundKind::GirthFour { s },
                lower: ratio_to_f64(lo),
                upper: ratio_to_f64(hi),
            })
        }
    }

    pub fn violated_by(&self, e: &EigenResult) -> bool {
        e.lambda_min < self.lower - BOUND_SLACK || e.lambda_max > self.upper + BOUND_SLACK
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmpiricalRicReport {
    pub k: usize,
    pub num_samples: usize,
    /// Largest `max(lambda_max - 1, 1 - lambda_min)` over the samples.
    pub delta_hat: f64,
    pub lambda_min: f64,
    pub lambda_max: f64,
    pub bounds: Option<EigenBounds>,
    pub bound_violations: usize,
    pub unconverged: usize,
    pub seed: u64,
}

fn check_k(a: &SensingMatrix, k: usize, num_samples: usize) -> Result<(), SpectralError> {
    if k == 0 {
        return Err(SpectralError::KZero);
    }
    if k > a.ncols() {
        return Err(SpectralError::KTooLarge { k, n: a.ncols() });
    }
    if num_samples == 0 {
        return Err(SpectralError::NoSamples);
    }
    Ok(())
}

/// Column subset for sample `index`, drawn from its own derived stream.
fn sample_columns(n: usize, k: usize, seed: u64, index: usize) -> Vec<usize> {
    let mut rng = rng_from_seed(derive_seed(seed, k as u64, index as u64));
    let mut scratch: Vec<usize> = (0..n).collect();
    sample_subset(&mut rng, &mut scratch, k)
}

/// Extreme Gram eigenvalues over `num_samples` uniform `k`-column subsets,
/// each checked against the eigenvalue bounds matching the matrix's girth.
pub fn empirical_ric(
    a: &SensingMatrix,
    k: usize,
    num_samples: usize,
    seed: u64,
) -> Result<EmpiricalRicReport, SpectralError> {
    check_k(a, k, num_samples)?;
    let bounds = EigenBounds::for_matrix(a, k);
    let results: Vec<EigenResult> = (0..num_samples)
        .into_par_iter()
        .map(|i| {
            let cols = sample_columns(a.ncols(), k, seed, i);
            let gram = a.gram_unchecked(cols).to_f64();
            extreme_eigenvalues(&gram, k, DEFAULT_TOL, DEFAULT_MAX_SWEEPS)
        })
        .collect::<Result<_, _>>()?;

    let mut report = EmpiricalRicReport {
        k,
        num_samples,
        delta_hat: 0.0,
        lambda_min: f64::INFINITY,
        lambda_max: f64::NEG_INFINITY,
        bounds,
        bound_violations: 0,
        unconverged: 0,
        seed,
    };
    for e in &results {
        report.delta_hat = report
            .delta_hat
            .max(e.lambda_max - 1.0)
            .max(1.0 - e.lambda_min);
        report.lambda_min = report.lambda_min.min(e.lambda_min);
        report.lambda_max = report.lambda_max.max(e.lambda_max);
        if bounds.is_some_and(|b| b.violated_by(e)) {
            report.bound_violations += 1;
        }
        if !e.converged {
            report.unconverged += 1;
        }
    }
    Ok(report)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OffdiagStats {
    pub k: usize,
    pub num_samples: usize,
    pub p_min: f64,
    pub p_mean: f64,
    pub p_max: f64,
    pub seed: u64,
    /// Per-sample proportions in sample order.
    pub proportions: Vec<f64>,
}

impl OffdiagStats {
    /// Fraction of samples with `|p - rho| / rho <= rel_tol`.
    pub fn concentration(&self, rho: f64, rel_tol: f64) -> f64 {
        let hits = self
            .proportions
            .iter()
            .filter(|&&p| ((p - rho) / rho).abs() <= rel_tol)
            .count();
        hits as f64 / self.proportions.len() as f64
    }
}

/// Proportion of nonzero off-diagonal entries in sampled `k x k` Gram blocks.
pub fn offdiag_proportion_stats(
    a: &SensingMatrix,
    k: usize,
    num_samples: usize,
    seed: u64,
) -> Result<OffdiagStats, SpectralError> {
    check_k(a, k, num_samples)?;
    if k < 2 {
        return Err(SpectralError::KZero);
    }
    let offdiag = (k * (k - 1)) as f64;
    let proportions: Vec<f64> = (0..num_samples)
        .into_par_iter()
        .map(|i| {
            let cols = sample_columns(a.ncols(), k, seed, i);
            let mut nonzero = 0usize;
            for x in 0..k {
                for y in (x + 1)..k {
                    if a.overlap(cols[x], cols[y]) > 0 {
                        nonzero += 2;
                    }
                }
            }
            nonzero as f64 / offdiag
        })
        .collect();
    let p_min = proportions.iter().copied().fold(f64::INFINITY, f64::min);
    let p_max = proportions.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let p_mean = proportions.iter().sum::<f64>() / num_samples as f64;
    Ok(OffdiagStats {
        k,
        num_samples,
        p_min,
        p_mean,
        p_max,
        seed,
        proportions,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrix::tests::fano;

    #[test]
    fn identity_eigenvalues() {
        let mut s = vec![0.0; 16];
        for i in 0..4 {
            s[i * 4 + i] = 1.0;
        }
        let e = extreme_eigenvalues(&s, 4, DEFAULT_TOL, DEFAULT_MAX_SWEEPS).unwrap();
        assert_eq!((e.lambda_max, e.lambda_min), (1.0, 1.0));
        assert!(e.converged);
        assert_eq!(e.sweeps, 0);
    }

    #[test]
    fn constant_offdiag() {
        let c = 1.0 / 7.0;
        let mut s = vec![c; 9];
        for i in 0..3 {
            s[i * 3 + i] = 1.0;
        }
        let e = extreme_eigenvalues(&s, 3, DEFAULT_TOL, DEFAULT_MAX_SWEEPS).unwrap();
        assert!((e.lambda_max - 9.0 / 7.0).abs() < 1e-12);
        assert!((e.lambda_min - 6.0 / 7.0).abs() < 1e-12);
    }

    #[test]
    fn rejects_asymmetric() {
        let s = [1.0, 0.5, 0.4, 1.0];
        assert!(matches!(
            extreme_eigenvalues(&s, 2, DEFAULT_TOL, 10),
            Err(SpectralError::NotSymmetric(_))
        ));
        assert!(matches!(
            extreme_eigenvalues(&[], 0, DEFAULT_TOL, 10),
            Err(SpectralError::BadShape)
        ));
    }

    #[test]
    fn unconverged_flag() {
        let s = [2.0, 1.0, 0.5, 1.0, 3.0, 0.25, 0.5, 0.25, 1.0];
        let e = extreme_eigenvalues(&s, 3, 1e-15, 0).unwrap();
        assert!(!e.converged);
    }

    #[test]
    fn fano_pairs_exact() {
        let r = empirical_ric(&fano(), 2, 50, 3).unwrap();
        assert!((r.lambda_max - 4.0 / 3.0).abs() < 1e-14);
        assert!((r.lambda_min - 2.0 / 3.0).abs() < 1e-14);
        assert_eq!(r.bound_violations, 0);
        assert_eq!(r.bounds.unwrap().kind, BoundKind::GirthAboveFour);
    }

    #[test]
    fn single_column_has_zero_delta() {
        let r = empirical_ric(&fano(), 1, 10, 0).unwrap();
        assert_eq!(r.delta_hat, 0.0);
    }

    #[test]
    fn k_checks() {
        assert!(matches!(
            empirical_ric(&fano(), 8, 10, 0),
            Err(SpectralError::KTooLarge { k: 8, n: 7 })
        ));
        assert!(matches!(
            offdiag_proportion_stats(&fano(), 8, 10, 0),
            Err(SpectralError::KTooLarge { .. })
        ));
        assert!(empirical_ric(&fano(), 0, 10, 0).is_err());
        assert!(empirical_ric(&fano(), 2, 0, 0).is_err());
    }

    #[test]
    fn fano_proportions_all_one() {
        for k in [2, 4, 7] {
            let s = offdiag_proportion_stats(&fano(), k, 20, 1).unwrap();
            assert_eq!((s.p_min, s.p_mean, s.p_max), (1.0, 1.0, 1.0));
        }
    }

    #[test]
    fn disjoint_proportions_zero() {
        let a = SensingMatrix::from_supports(6, 3, 2, vec![vec![0, 1], vec![2, 3], vec![4, 5]])
            .unwrap();
        let s = offdiag_proportion_stats(&a, 3, 5, 0).unwrap();
        assert_eq!((s.p_min, s.p_mean, s.p_max), (0.0, 0.0, 0.0));
    }

    #[test]
    fn sampling_is_reproducible() {
        let a = fano();
        assert_eq!(
            empirical_ric(&a, 3, 30, 11).unwrap(),
            empirical_ric(&a, 3, 30, 11).unwrap()
        );
    }
}
