//! Closed-form correlation laws and restricted isometry constants for
//! regular binary matrices.
//!
//! Everything with rational inputs is evaluated exactly. The Wigner-type
//! estimate [`ric_rip2`] contains a square root and is evaluated in `f64`.

use num_bigint::BigUint;
use num_rational::{BigRational, Rational64};
use num_traits::{One, Zero};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TheoryError {
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("parameters infeasible for girth > 4: rho = {rho}")]
    InfeasibleParameters { rho: Rational64 },
    #[error("side condition violated: {0}")]
    SideConditionViolated(String),
    #[error("(d = {d}, s = {s}, M = {m}) fits neither branch of the girth-4 formula")]
    ParameterOutOfBranch { d: i64, s: i64, m: i64 },
    #[error("degree {d} exceeds M - 2 = {}", m - 2)]
    InvalidRange { d: i64, m: i64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FormulaId {
    /// Girth > 4, exact worst-case bound.
    Rip1,
    /// Girth > 4, semicircle-law approximation.
    Rip2,
    /// Girth 4, `3 <= d <= M/2`.
    Rip3Low,
    /// Girth 4, `M/2 < d <= M - 2`.
    Rip3High,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RicValue {
    Exact(Rational64),
    Approximate(f64),
}

impl RicValue {
    pub fn to_f64(self) -> f64 {
        match self {
            RicValue::Exact(r) => ratio_to_f64(r),
            RicValue::Approximate(v) => v,
        }
    }

    pub fn exact(self) -> Option<Rational64> {
        match self {
            RicValue::Exact(r) => Some(r),
            RicValue::Approximate(_) => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Condition {
    pub description: String,
    pub satisfied: bool,
}

impl Condition {
    fn new(description: impl Into<String>, satisfied: bool) -> Self {
        Condition {
            description: description.into(),
            satisfied,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RicInputs {
    pub k: i64,
    pub d: i64,
    pub s: Option<i64>,
    pub m: Option<i64>,
    pub rho: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RicFormulaResult {
    pub delta_k: RicValue,
    pub formula: FormulaId,
    pub inputs: RicInputs,
    pub validity: Vec<Condition>,
}

pub fn ratio_to_f64(r: Rational64) -> f64 {
    *r.numer() as f64 / *r.denom() as f64
}

/// Admissible sparsity from the coherence bound `k < (1 + 1/mu) / 2`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SparsityBound {
    /// Coherence zero: no restriction.
    Unbounded,
    Max(u64),
}

/// Largest integer `k` with `k < (1 + 1/mu) / 2`.
pub fn coherence_k_bound(mu: Rational64) -> Result<SparsityBound, TheoryError> {
    if mu.is_zero() {
        return Ok(SparsityBound::Unbounded);
    }
    if mu < Rational64::zero() || mu > Rational64::one() {
        return Err(TheoryError::InvalidInput(format!(
            "coherence {mu} outside [0, 1]"
        )));
    }
    let limit = (Rational64::one() + mu.recip()) / Rational64::from_integer(2);
    // largest integer strictly below `limit`
    let k = limit.ceil().to_integer() - 1;
    Ok(SparsityBound::Max(k.max(0) as u64))
}

/// Probability that two distinct columns of a girth > 4 regular matrix
/// overlap, `(N d^2 - M d) / ((N - 1) M)`.
pub fn lemma1_rho(m: i64, n: i64, d: i64) -> Result<Rational64, TheoryError> {
    if m < 1 || n < 2 || d < 1 || d > m {
        return Err(TheoryError::InvalidInput(format!(
            "need M >= 1, N >= 2, 1 <= d <= M; got ({m}, {n}, {d})"
        )));
    }
    let rho = Rational64::new(n * d * d - m * d, (n - 1) * m);
    if rho > Rational64::one() || rho < Rational64::zero() {
        return Err(TheoryError::InfeasibleParameters { rho });
    }
    Ok(rho)
}

fn factorial(n: u64) -> BigUint {
    (1..=n).fold(BigUint::one(), |acc, i| acc * i)
}

/// Probability that two independent uniform `d`-subsets of `M` rows share
/// exactly `s` rows:
/// `d! d! (M-d)! (M-d)! / ((d-s)! (d-s)! s! (M-2d+s)! M!)`.
///
/// Returns zero when `M - 2d + s < 0`.
pub fn lemma2_pmf(m: u64, d: u64, s: u64) -> Result<BigRational, TheoryError> {
    if d > m || s > d {
        return Err(TheoryError::InvalidInput(format!(
            "need s <= d <= M; got (M = {m}, d = {d}, s = {s})"
        )));
    }
    if m + s < 2 * d {
        return Ok(BigRational::zero());
    }
    let fd = factorial(d);
    let fmd = factorial(m - d);
    let fds = factorial(d - s);
    let numer = &fd * &fd * &fmd * &fmd;
    let denom = &fds * &fds * factorial(s) * factorial(m + s - 2 * d) * factorial(m);
    Ok(BigRational::new(numer.into(), denom.into()))
}

fn require(cond: bool, msg: impl FnOnce() -> String) -> Result<(), TheoryError> {
    if cond {
        Ok(())
    } else {
        Err(TheoryError::InvalidInput(msg()))
    }
}

/// RIC of a regular girth > 4 matrix: `(3k - 2) / (4d + k - 2)`.
pub fn ric_rip1(k: i64, d: i64) -> Result<RicFormulaResult, TheoryError> {
    require(k >= 1 && d >= 2, || format!("need k >= 1, d >= 2; got ({k}, {d})"))?;
    Ok(RicFormulaResult {
        delta_k: RicValue::Exact(Rational64::new(3 * k - 2, 4 * d + k - 2)),
        formula: FormulaId::Rip1,
        inputs: RicInputs {
            k,
            d,
            s: None,
            m: None,
            rho: None,
        },
        validity: vec![Condition::new("k >= 2", k >= 2)],
    })
}

/// Semicircle-law RIC estimate for a girth > 4 matrix whose Gram
/// off-diagonals are nonzero with probability `rho`.
///
/// Asymptotic in `k`; the result is flagged accordingly in `validity`.
pub fn ric_rip2(k: i64, d: i64, rho: f64) -> Result<RicFormulaResult, TheoryError> {
    require(k >= 1 && d >= 2, || format!("need k >= 1, d >= 2; got ({k}, {d})"))?;
    require(rho > 0.0 && rho < 1.0, || format!("rho {rho} outside (0, 1)"))?;
    let side = (k * (k - 1)) as f64 * rho;
    if side < 2.0 {
        return Err(TheoryError::SideConditionViolated(format!(
            "k(k-1)rho = {side} < 2"
        )));
    }
    let (num, den) = rip2_terms(k as f64, d as f64, rho);
    if den <= 0.0 {
        return Err(TheoryError::SideConditionViolated(format!(
            "denominator {den} not positive"
        )));
    }
    Ok(RicFormulaResult {
        delta_k: RicValue::Approximate(num / den),
        formula: FormulaId::Rip2,
        inputs: RicInputs {
            k,
            d,
            s: None,
            m: None,
            rho: Some(rho),
        },
        validity: vec![
            Condition::new("k(k-1)rho >= 2", true),
            Condition::new("asymptotic regime k -> infinity", false),
        ],
    })
}

fn rip2_terms(k: f64, d: f64, rho: f64) -> (f64, f64) {
    let kr = k * rho;
    let spread = 2.0 * (kr * (1.0 - rho)).sqrt();
    (kr + spread + 1.0, kr - spread + 2.0 * d + 1.0)
}

/// RIC of a regular girth-4 matrix with coherence `s/d`.
pub fn ric_rip3(k: i64, d: i64, s: i64, m: i64) -> Result<RicFormulaResult, TheoryError> {
    require(k >= 1, || format!("need k >= 1; got {k}"))?;
    let low = d >= 3 && 2 * d <= m && s >= 2 && s <= d - 1;
    let high = 2 * d > m && d <= m - 2 && s >= (2 * d - m).max(2) && s <= d - 1;
    let (num, den, formula) = if low {
        ((3 * k - 2) * s, (k - 2) * s + 4 * d, FormulaId::Rip3Low)
    } else if high {
        (
            (3 * k - 2) * s + (k - 2) * (m - 2 * d),
            (k - 2) * s - (m - 2 * d) * k + 2 * m,
            FormulaId::Rip3High,
        )
    } else {
        return Err(TheoryError::ParameterOutOfBranch { d, s, m });
    };
    if den <= 0 {
        return Err(TheoryError::SideConditionViolated(format!(
            "denominator {den} not positive"
        )));
    }
    Ok(RicFormulaResult {
        delta_k: RicValue::Exact(Rational64::new(num, den)),
        formula,
        inputs: RicInputs {
            k,
            d,
            s: Some(s),
            m: Some(m),
            rho: None,
        },
        validity: vec![Condition::new("k >= 2", k >= 2)],
    })
}

/// Extreme-eigenvalue bounds `(lambda_min, lambda_max)` of a `k x k`
/// normalized Gram block of a girth > 4 matrix of degree `d`.
pub fn girth6_eigen_bounds(k: i64, d: i64) -> (Rational64, Rational64) {
    (
        Rational64::one() - Rational64::new(k, 2 * d),
        Rational64::new(k + d - 1, d),
    )
}

/// Extreme-eigenvalue bounds for a Gram block whose off-diagonals lie in
/// `[0, s/d]` (girth 4, coherence `s/d`). Uses the high-degree form when
/// `2d > M`, where every pair overlaps in at least `2d - M` rows.
pub fn girth4_eigen_bounds(k: i64, d: i64, s: i64, m: i64) -> (Rational64, Rational64) {
    let upper = Rational64::new((k - 1) * s + d, d);
    let lower = if 2 * d <= m {
        Rational64::one() - Rational64::new(s * k, 2 * d)
    } else {
        Rational64::new(k * (2 * d - m - s) + 2 * (m - d), 2 * d)
    };
    (lower, upper)
}

/// Largest `d` with `1 + d (dN/M - 1) <= N`.
pub fn dmax_theoretical_bound(m: u64, n: u64) -> u64 {
    let fits = |d: u64| {
        // multiply through by M: M + d(dN - M) <= N M
        let lhs = m as i128 + d as i128 * (d as i128 * n as i128 - m as i128);
        lhs <= n as i128 * m as i128
    };
    let mut d = 1;
    while fits(d + 1) && d < m {
        d += 1;
    }
    d
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Dominance {
    NearOptimalBetter,
    ConditionFails,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum DominanceCondition {
    /// `d <= d_max`: the girth > 4 matrix at `d_max` is best outright.
    WithinDmax,
    /// `d_max < d <= M/2`: requires `d_max >= d / s`.
    LowDegree { threshold: Rational64 },
    /// `M/2 < d <= M - 2`: requires `d_max >= (k+1)(2d-M) / (6s + 2(2d-M))`.
    HighDegree { threshold: Rational64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DominanceVerdict {
    pub verdict: Dominance,
    pub condition: DominanceCondition,
}

/// Whether the near-optimal girth > 4 matrix of degree `d_max` has a smaller
/// RIC than a girth-4 matrix of degree `d` and coherence `s/d`.
pub fn theorem4_dominates(
    d_max: i64,
    d: i64,
    s: i64,
    m: i64,
    k: i64,
) -> Result<DominanceVerdict, TheoryError> {
    if d > m - 2 {
        return Err(TheoryError::InvalidRange { d, m });
    }
    require(s >= 1 && d_max >= 1 && k >= 1, || {
        format!("need s, d_max, k >= 1; got ({s}, {d_max}, {k})")
    })?;
    if d <= d_max {
        return Ok(DominanceVerdict {
            verdict: Dominance::NearOptimalBetter,
            condition: DominanceCondition::WithinDmax,
        });
    }
    let (threshold, condition) = if 2 * d <= m {
        let t = Rational64::new(d, s);
        (t, DominanceCondition::LowDegree { threshold: t })
    } else {
        let excess = 2 * d - m;
        let t = Rational64::new((k + 1) * excess, 6 * s + 2 * excess);
        (t, DominanceCondition::HighDegree { threshold: t })
    };
    let verdict = if Rational64::from_integer(d_max) >= threshold {
        Dominance::NearOptimalBetter
    } else {
        Dominance::ConditionFails
    };
    Ok(DominanceVerdict { verdict, condition })
}
