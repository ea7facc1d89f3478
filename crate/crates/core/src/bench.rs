//! Seeded Monte Carlo recovery experiments.
//!
//! Trial `t` at sparsity `k` draws everything it needs (matrix for random
//! sources, support, values, noise) from `derive_seed(master_seed, k, t)`,
//! so results do not depend on how trials are scheduled across threads.

use std::fmt::Write as _;
use std::path::PathBuf;

use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::construction::{gaussian_matrix, peg_construct, random_regular, ConstructionError, PegConfig};
use crate::linalg::norm2;
use crate::matrix::MatrixError;
use crate::recovery::{
    iht, omp, omp_residual, relative_error, sp, BpParams, BpSolver, IhtParams, OmpStop, Operator,
    RecoveryError, RecoveryOutput, SensingOperator,
};
use crate::rng::{derive_seed, rng_from_seed, sample_subset_fresh};

pub const TOOL_NAME: &str = "binsense";
pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

/// CSV header of every report.
pub const CSV_HEADER: &str = "k,sigma,trials,successes,success_rate,stderr,mean_recovery_rate";

/// Sparsity used by noise sweeps when none is given.
pub const DEFAULT_NOISE_K: usize = 40;

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("invalid experiment config: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Construction(#[from] ConstructionError),
    #[error(transparent)]
    Matrix(#[from] MatrixError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum MatrixSource {
    /// Built once with deterministic progressive edge growth.
    Peg { m: usize, n: usize, d: usize },
    /// Redrawn for every trial.
    RandomBinary { m: usize, n: usize, d: usize },
    /// Redrawn for every trial.
    Gaussian { m: usize, n: usize },
    File { path: PathBuf },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "name")]
pub enum Algorithm {
    Omp {
        #[serde(default)]
        stop: OmpStop,
    },
    Iht {
        #[serde(default)]
        params: IhtParams,
    },
    Sp {
        #[serde(default = "default_sp_iters")]
        max_iters: usize,
    },
    Bp {
        #[serde(default)]
        params: BpParams,
    },
}

fn default_sp_iters() -> usize {
    100
}

impl Algorithm {
    pub fn omp() -> Self {
        Algorithm::Omp {
            stop: OmpStop::default(),
        }
    }

    pub fn iht() -> Self {
        Algorithm::Iht {
            params: IhtParams::default(),
        }
    }

    pub fn sp() -> Self {
        Algorithm::Sp {
            max_iters: default_sp_iters(),
        }
    }

    pub fn bp() -> Self {
        Algorithm::Bp {
            params: BpParams::default(),
        }
    }

    /// Parses `omp`, `iht`, `sp` or `bp` with default parameters.
    pub fn from_name(name: &str) -> Option<Self> {
        match name.to_ascii_lowercase().as_str() {
            "omp" => Some(Self::omp()),
            "iht" => Some(Self::iht()),
            "sp" => Some(Self::sp()),
            "bp" => Some(Self::bp()),
            _ => None,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Algorithm::Omp { .. } => "omp",
            Algorithm::Iht { .. } => "iht",
            Algorithm::Sp { .. } => "sp",
            Algorithm::Bp { .. } => "bp",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Sparsity {
    Single(usize),
    /// Inclusive range.
    Range { start: usize, end: usize },
}

impl Sparsity {
    pub fn values(&self) -> Vec<usize> {
        match *self {
            Sparsity::Single(k) => vec![k],
            Sparsity::Range { start, end } => (start..=end).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub matrix_source: MatrixSource,
    pub algorithm: Algorithm,
    pub sparsity: Sparsity,
    pub trials: usize,
    #[serde(default)]
    pub master_seed: u64,
    #[serde(default)]
    pub noise_sigma: f64,
    #[serde(default = "default_threshold")]
    pub success_threshold: f64,
    #[serde(default)]
    pub signal_normalization: bool,
}

fn default_threshold() -> f64 {
    1e-4
}

impl ExperimentConfig {
    pub fn new(matrix_source: MatrixSource, algorithm: Algorithm, sparsity: Sparsity, trials: usize) -> Self {
        ExperimentConfig {
            matrix_source,
            algorithm,
            sparsity,
            trials,
            master_seed: 0,
            noise_sigma: 0.0,
            success_threshold: default_threshold(),
            signal_normalization: false,
        }
    }

    pub fn dims(&self) -> (usize, usize) {
        match &self.matrix_source {
            MatrixSource::Peg { m, n, .. } | MatrixSource::RandomBinary { m, n, .. } => (*m, *n),
            MatrixSource::Gaussian { m, n } => (*m, *n),
            MatrixSource::File { .. } => (0, 0),
        }
    }

    fn validate_k(&self, k: usize, m: usize, n: usize) -> Result<(), BenchError> {
        if k == 0 || k > m || k > n {
            return Err(BenchError::InvalidConfig(format!(
                "sparsity {k} outside [1, {}]",
                m.min(n)
            )));
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<(), BenchError> {
        if self.trials == 0 {
            return Err(BenchError::InvalidConfig("trials must be at least 1".into()));
        }
        if !(self.noise_sigma >= 0.0 && self.noise_sigma.is_finite()) {
            return Err(BenchError::InvalidConfig("noise_sigma must be finite and >= 0".into()));
        }
        if !(self.success_threshold >= 0.0) {
            return Err(BenchError::InvalidConfig("success_threshold must be >= 0".into()));
        }
        if let Sparsity::Range { start, end } = self.sparsity {
            if start > end {
                return Err(BenchError::InvalidConfig(format!("empty sparsity range {start}..={end}")));
            }
        }
        match &self.matrix_source {
            MatrixSource::Peg { m, n, d } | MatrixSource::RandomBinary { m, n, d } => {
                if *m == 0 || *n == 0 || *d == 0 || d > m {
                    return Err(BenchError::InvalidConfig(format!("bad matrix shape ({m}, {n}, {d})")));
                }
            }
            MatrixSource::Gaussian { m, n } => {
                if *m == 0 || *n == 0 {
                    return Err(BenchError::InvalidConfig(format!("bad matrix shape ({m}, {n})")));
                }
            }
            MatrixSource::File { .. } => {}
        }
        Ok(())
    }
}

/// One row of a report: a sparsity level and noise level.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecoveryStats {
    pub k: usize,
    pub sigma: f64,
    pub trials: usize,
    pub successes: usize,
    pub success_rate: f64,
    /// Binomial standard error of `success_rate`.
    pub stderr: f64,
    /// Mean of `max(0, 1 - ||x_hat - x|| / ||x||)`.
    pub mean_recovery_rate: f64,
    /// Standard error of `mean_recovery_rate`.
    pub mean_recovery_stderr: f64,
}

impl RecoveryStats {
    fn from_errors(k: usize, sigma: f64, threshold: f64, errors: &[Option<f64>]) -> Self {
        let trials = errors.len();
        let t = trials as f64;
        let successes = errors
            .iter()
            .filter(|e| matches!(e, Some(e) if *e <= threshold))
            .count();
        let rates: Vec<f64> = errors
            .iter()
            .map(|e| e.map_or(0.0, |e| (1.0 - e).max(0.0)))
            .collect();
        let mean = rates.iter().sum::<f64>() / t;
        let var = if trials > 1 {
            rates.iter().map(|r| (r - mean) * (r - mean)).sum::<f64>() / (t - 1.0)
        } else {
            0.0
        };
        let p = successes as f64 / t;
        RecoveryStats {
            k,
            sigma,
            trials,
            successes,
            success_rate: p,
            stderr: (p * (1.0 - p) / t).sqrt(),
            mean_recovery_rate: mean,
            mean_recovery_stderr: (var / t).sqrt(),
        }
    }

    pub fn csv_line(&self) -> String {
        format!(
            "{},{},{},{},{},{},{}",
            self.k,
            self.sigma,
            self.trials,
            self.successes,
            self.success_rate,
            self.stderr,
            self.mean_recovery_rate
        )
    }
}

/// What to run on top of a config; stored in reports so they can be replayed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum Plan {
    /// One row per sparsity value in the config.
    Trials,
    /// Ascending sparsity scan stopped at the first level below `target_rate`.
    Kmax { target_rate: f64 },
    /// One row per sparsity value in `ks`.
    SparsitySweep { ks: Vec<usize> },
    /// One row per noise level at fixed sparsity, signals normalized.
    NoiseSweep { sigmas: Vec<f64>, k: Option<usize> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub tool: String,
    pub version: String,
    pub config: ExperimentConfig,
    pub plan: Plan,
    /// Only set by [`Plan::Kmax`].
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k_max: Option<usize>,
    pub rows: Vec<RecoveryStats>,
}

impl Report {
    pub fn to_csv(&self) -> String {
        let mut s = String::with_capacity(64 * (self.rows.len() + 1));
        s.push_str(CSV_HEADER);
        s.push('\n');
        for r in &self.rows {
            let _ = writeln!(s, "{}", r.csv_line());
        }
        s
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<Self, BenchError> {
        serde_json::from_str(text).map_err(|e| BenchError::InvalidConfig(e.to_string()))
    }

    /// Re-runs the embedded config and plan.
    pub fn replay(&self) -> Result<Report, BenchError> {
        run_plan(&self.config, &self.plan)
    }
}

enum MatrixPlan {
    Fixed(Operator),
    PerTrial,
}

fn fixed_matrix(source: &MatrixSource) -> Result<MatrixPlan, BenchError> {
    Ok(match source {
        MatrixSource::Peg { m, n, d } => {
            MatrixPlan::Fixed(Operator::Binary(peg_construct(*m, *n, *d, &PegConfig::default())?))
        }
        MatrixSource::File { path } => MatrixPlan::Fixed(Operator::read(path)?),
        MatrixSource::RandomBinary { .. } | MatrixSource::Gaussian { .. } => MatrixPlan::PerTrial,
    })
}

fn trial_matrix(source: &MatrixSource, seed: u64) -> Result<Operator, BenchError> {
    Ok(match source {
        MatrixSource::RandomBinary { m, n, d } => Operator::Binary(random_regular(*m, *n, *d, seed)?),
        MatrixSource::Gaussian { m, n } => Operator::Dense(gaussian_matrix(*m, *n, seed)),
        _ => unreachable!("fixed sources are built once"),
    })
}

/// The signal and measurement drawn for one trial.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialDraw {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
}

/// Draws the clean signal, adds noise to it and measures.
pub fn draw_trial<A: SensingOperator + ?Sized>(
    a: &A,
    k: usize,
    sigma: f64,
    normalize: bool,
    seed: u64,
) -> TrialDraw {
    let n = a.ncols();
    let mut rng = rng_from_seed(seed);
    let support = sample_subset_fresh(&mut rng, n, k);
    let mut x = vec![0.0; n];
    for &j in &support {
        x[j] = StandardNormal.sample(&mut rng);
    }
    if normalize {
        let norm = norm2(&x);
        if norm > 0.0 {
            x.iter_mut().for_each(|v| *v /= norm);
        }
    }
    let y = if sigma > 0.0 {
        let noisy: Vec<f64> = x
            .iter()
            .map(|v| {
                let e: f64 = StandardNormal.sample(&mut rng);
                v + sigma * e
            })
            .collect();
        a.apply(&noisy)
    } else {
        a.apply(&x)
    };
    TrialDraw { x, y }
}

/// Runs one solver on `y`.
pub fn solve<A: SensingOperator + ?Sized>(
    algorithm: &Algorithm,
    a: &A,
    y: &[f64],
    k: usize,
    noisy: bool,
) -> Result<RecoveryOutput, RecoveryError> {
    match algorithm {
        Algorithm::Omp { stop } => match (stop, noisy) {
            (OmpStop::Sparsity, _) | (OmpStop::Auto(_), true) => omp(a, y, k),
            (OmpStop::Residual(tol), _) | (OmpStop::Auto(tol), false) => {
                omp_residual(a, y, *tol, a.nrows().min(a.ncols()))
            }
        },
        Algorithm::Iht { params } => iht(a, y, k, params),
        Algorithm::Sp { max_iters } => sp(a, y, k, *max_iters),
        Algorithm::Bp { params } => BpSolver::new(a).solve(y, params),
    }
}

fn trial_error(
    config: &ExperimentConfig,
    fixed: &MatrixPlan,
    bp_fixed: Option<&BpSolver<'_, Operator>>,
    k: usize,
    sigma: f64,
    normalize: bool,
    t: u64,
) -> Option<f64> {
    let seed = derive_seed(config.master_seed, k as u64, t);
    let owned;
    let a = match fixed {
        MatrixPlan::Fixed(a) => a,
        MatrixPlan::PerTrial => {
            owned = trial_matrix(&config.matrix_source, derive_seed(seed, 1, 0)).ok()?;
            &owned
        }
    };
    let draw = draw_trial(a, k, sigma, normalize, seed);
    let out = match (&config.algorithm, bp_fixed) {
        (Algorithm::Bp { params }, Some(solver)) => solver.solve(&draw.y, params),
        (alg, _) => solve(alg, a, &draw.y, k, sigma > 0.0),
    };
    out.ok()
        .map(|o| relative_error(&o.x_hat, &draw.x))
        .filter(|e| e.is_finite())
}

struct Runner<'c> {
    config: &'c ExperimentConfig,
    fixed: MatrixPlan,
    m: usize,
    n: usize,
}

impl<'c> Runner<'c> {
    fn new(config: &'c ExperimentConfig) -> Result<Self, BenchError> {
        config.validate()?;
        let fixed = fixed_matrix(&config.matrix_source)?;
        let (m, n) = match &fixed {
            MatrixPlan::Fixed(a) => (a.nrows(), a.ncols()),
            MatrixPlan::PerTrial => config.dims(),
        };
        if let MatrixSource::RandomBinary { m, n, d } = config.matrix_source {
            // fail fast instead of counting every trial as a failure
            random_regular(m, n, d, config.master_seed)?;
        }
        Ok(Runner { config, fixed, m, n })
    }

    fn row(&self, k: usize, sigma: f64, normalize: bool) -> Result<RecoveryStats, BenchError> {
        self.config.validate_k(k, self.m, self.n)?;
        let bp_fixed = match (&self.config.algorithm, &self.fixed) {
            (Algorithm::Bp { .. }, MatrixPlan::Fixed(a)) => Some(BpSolver::new(a)),
            _ => None,
        };
        let errors: Vec<Option<f64>> = (0..self.config.trials as u64)
            .into_par_iter()
            .map(|t| trial_error(self.config, &self.fixed, bp_fixed.as_ref(), k, sigma, normalize, t))
            .collect();
        Ok(RecoveryStats::from_errors(
            k,
            sigma,
            self.config.success_threshold,
            &errors,
        ))
    }
}

fn report(config: &ExperimentConfig, plan: Plan, k_max: Option<usize>, rows: Vec<RecoveryStats>) -> Report {
    Report {
        tool: TOOL_NAME.to_string(),
        version: TOOL_VERSION.to_string(),
        config: config.clone(),
        plan,
        k_max,
        rows,
    }
}

/// One row per sparsity value of the config.
pub fn run_trials(config: &ExperimentConfig) -> Result<Report, BenchError> {
    let runner = Runner::new(config)?;
    let rows = config
        .sparsity
        .values()
        .into_iter()
        .map(|k| runner.row(k, config.noise_sigma, config.signal_normalization))
        .collect::<Result<_, _>>()?;
    Ok(report(config, Plan::Trials, None, rows))
}

/// Largest `k` reaching `target_rate` before the first `k` that misses it,
/// scanning the config's sparsity values in ascending order. Rows stop at
/// the first miss; `k_max` is 0 if the first value already misses.
pub fn find_kmax(config: &ExperimentConfig, target_rate: f64) -> Result<Report, BenchError> {
    if !(target_rate > 0.0 && target_rate < 1.0) {
        return Err(BenchError::InvalidConfig(format!("target rate {target_rate} not in (0, 1)")));
    }
    let runner = Runner::new(config)?;
    let mut rows = Vec::new();
    let mut k_max = 0;
    for k in config.sparsity.values() {
        let row = runner.row(k, config.noise_sigma, config.signal_normalization)?;
        let pass = row.success_rate >= target_rate;
        rows.push(row);
        if !pass {
            break;
        }
        k_max = k;
    }
    Ok(report(config, Plan::Kmax { target_rate }, Some(k_max), rows))
}

/// Sparsity sweep: one row per `k`, at the config's noise level.
pub fn sweep_sparsity(config: &ExperimentConfig, ks: &[usize]) -> Result<Report, BenchError> {
    if ks.is_empty() {
        return Err(BenchError::InvalidConfig("empty sparsity list".into()));
    }
    let runner = Runner::new(config)?;
    let rows = ks
        .iter()
        .map(|&k| runner.row(k, config.noise_sigma, config.signal_normalization))
        .collect::<Result<_, _>>()?;
    Ok(report(config, Plan::SparsitySweep { ks: ks.to_vec() }, None, rows))
}

/// Noise sweep at fixed `k` (default 40) with normalized signals.
pub fn sweep_noise(config: &ExperimentConfig, sigmas: &[f64], k: Option<usize>) -> Result<Report, BenchError> {
    if sigmas.is_empty() {
        return Err(BenchError::InvalidConfig("empty noise list".into()));
    }
    if sigmas.iter().any(|s| !(*s >= 0.0 && s.is_finite())) {
        return Err(BenchError::InvalidConfig("noise levels must be finite and >= 0".into()));
    }
    let runner = Runner::new(config)?;
    let k_fixed = k.unwrap_or(DEFAULT_NOISE_K);
    let rows = sigmas
        .iter()
        .map(|&s| runner.row(k_fixed, s, true))
        .collect::<Result<_, _>>()?;
    Ok(report(
        config,
        Plan::NoiseSweep {
            sigmas: sigmas.to_vec(),
            k,
        },
        None,
        rows,
    ))
}

pub fn run_plan(config: &ExperimentConfig, plan: &Plan) -> Result<Report, BenchError> {
    match plan {
        Plan::Trials => run_trials(config),
        Plan::Kmax { target_rate } => find_kmax(config, *target_rate),
        Plan::SparsitySweep { ks } => sweep_sparsity(config, ks),
        Plan::NoiseSweep { sigmas, k } => sweep_noise(config, sigmas, *k),
    }
}
