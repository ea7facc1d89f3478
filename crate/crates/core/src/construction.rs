//! Matrix generators: progressive edge growth, uniform random regular
//! binary matrices, Gaussian baselines, and the practical `d_max` search.

use std::collections::HashSet;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::DenseMatrix;
use crate::matrix::{MatrixError, SensingMatrix};
use crate::rng::{derive_seed, rng_from_seed, sample_subset, SimRng};
use crate::theory::dmax_theoretical_bound;

#[derive(Debug, Error)]
pub enum ConstructionError {
    #[error("degree {d} infeasible for {m} rows (need 2 <= d <= M - 2)")]
    InfeasibleDegree { m: usize, d: usize },
    #[error("no girth >= {target} matrix found for (M={m}, N={n}, d={d}) after {attempts} attempts")]
    ConstructionFailed {
        m: usize,
        n: usize,
        d: usize,
        target: usize,
        attempts: usize,
    },
    #[error(transparent)]
    Matrix(#[from] MatrixError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "mode", content = "seed")]
pub enum TieBreak {
    /// Pick the lowest-index candidate.
    LowestIndex,
    /// Pick uniformly among tied candidates.
    Random(u64),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PegConfig {
    pub tie_break: TieBreak,
    /// Randomized restarts allowed when a girth target is requested.
    pub max_retries: usize,
    /// Depth limit of the per-edge BFS expansion (in measurement levels).
    pub bfs_depth_cap: usize,
}

impl Default for PegConfig {
    fn default() -> Self {
        PegConfig {
            tie_break: TieBreak::LowestIndex,
            max_retries: 20,
            bfs_depth_cap: 64,
        }
    }
}

impl PegConfig {
    pub fn with_tie_break(&self, tie_break: TieBreak) -> Self {
        PegConfig {
            tie_break,
            ..self.clone()
        }
    }
}

/// Incremental bipartite state used while growing edges.
struct PegState {
    var_adj: Vec<Vec<usize>>,
    meas_adj: Vec<Vec<usize>>,
    // BFS scratch, stamped per expansion to avoid clearing
    seen_meas: Vec<u32>,
    seen_var: Vec<u32>,
    stamp: u32,
}

impl PegState {
    fn new(m: usize, n: usize, d: usize) -> Self {
        PegState {
            var_adj: vec![Vec::with_capacity(d); n],
            meas_adj: vec![Vec::new(); m],
            seen_meas: vec![0; m],
            seen_var: vec![0; n],
            stamp: 0,
        }
    }

    /// Candidate measurement nodes for a new edge at variable `v`.
    ///
    /// Rows already adjacent to `v` are not eligible. The BFS tree from `v` grows level by level; if it stops
    /// growing while some eligible row is still unreached, the unreached
    /// eligible rows are returned. If a level reaches the last eligible rows,
    /// the eligible rows first reached at that level are returned.
    fn candidates(&mut self, v: usize, depth_cap: usize, eligible: &[bool]) -> Vec<usize> {
        self.stamp += 1;
        let stamp = self.stamp;
        self.seen_var[v] = stamp;
        let mut frontier: Vec<usize> = self.var_adj[v].clone();
        for &c in &frontier {
            self.seen_meas[c] = stamp;
        }
        let total = eligible.iter().filter(|&&e| e).count();
        let mut covered = frontier.iter().filter(|&&c| eligible[c]).count();
        let mut depth = 0;
        loop {
            let mut next = Vec::new();
            for &c in &frontier {
                for &u in &self.meas_adj[c] {
                    if self.seen_var[u] == stamp {
                        continue;
                    }
                    self.seen_var[u] = stamp;
                    for &c2 in &self.var_adj[u] {
                        if self.seen_meas[c2] != stamp {
                            next.push(c2);
                            self.seen_meas[c2] = stamp;
                        }
                    }
                }
            }
            depth += 1;
            if next.is_empty() {
                break;
            }
            let newly = next.iter().filter(|&&c| eligible[c]).count();
            if covered + newly == total {
                next.retain(|&c| eligible[c]);
                return next;
            }
            covered += newly;
            if depth >= depth_cap {
                break;
            }
            frontier = next;
        }
        (0..eligible.len())
            .filter(|&c| eligible[c] && self.seen_meas[c] != stamp)
            .collect()
    }

    fn connect(&mut self, v: usize, c: usize) {
        let pos = self.var_adj[v].partition_point(|&x| x < c);
        self.var_adj[v].insert(pos, c);
        self.meas_adj[c].push(v);
    }
}

fn pick_min_degree(
    candidates: &[usize],
    meas_adj: &[Vec<usize>],
    tie: &mut Option<SimRng>,
) -> usize {
    let min_deg = candidates
        .iter()
        .map(|&c| meas_adj[c].len())
        .min()
        .expect("nonempty candidate set");
    let best = candidates.iter().copied().filter(|&c| meas_adj[c].len() == min_deg);
    match tie {
        None => best.min().expect("nonempty"),
        Some(rng) => {
            let pool: Vec<usize> = best.collect();
            pool[rng.random_range(0..pool.len())]
        }
    }
}

/// Progressive edge growth for an `m x n` matrix of column degree `d`.
///
/// Columns are filled in index order. The first edge of a column goes to a
/// row of minimum current degree; each further edge goes to a minimum-degree
/// row as far as possible from the column in the current graph. The girth of
/// the result is not checked here.
pub fn peg_construct(
    m: usize,
    n: usize,
    d: usize,
    config: &PegConfig,
) -> Result<SensingMatrix, ConstructionError> {
    if d < 2 || d + 2 > m {
        return Err(ConstructionError::InfeasibleDegree { m, d });
    }
    let mut tie = match config.tie_break {
        TieBreak::LowestIndex => None,
        TieBreak::Random(seed) => Some(rng_from_seed(seed)),
    };
    let all_rows: Vec<usize> = (0..m).collect();
    let mut state = PegState::new(m, n, d);
    let mut eligible = vec![true; m];
    for v in 0..n {
        for edge in 0..d {
            let c = if edge == 0 {
                pick_min_degree(&all_rows, &state.meas_adj, &mut tie)
            } else {
                eligible.fill(true);
                for &c in &state.var_adj[v] {
                    eligible[c] = false;
                }
                let cands = state.candidates(v, config.bfs_depth_cap.max(1), &eligible);
                pick_min_degree(&cands, &state.meas_adj, &mut tie)
            };
            state.connect(v, c);
        }
    }
    Ok(SensingMatrix::from_supports(m, n, d, state.var_adj)?)
}

/// PEG with a girth target: the configured tie-break first, then up to
/// `max_retries` seeded random-tie-break restarts. Small instances with a
/// target of at most 6 finish with [`exhaustive_girth6`].
pub fn peg_with_girth(
    m: usize,
    n: usize,
    d: usize,
    target_girth: usize,
    config: &PegConfig,
) -> Result<(SensingMatrix, usize), ConstructionError> {
    let base_seed = match config.tie_break {
        TieBreak::LowestIndex => 0,
        TieBreak::Random(seed) => seed,
    };
    let attempts = 1 + config.max_retries;
    for attempt in 0..attempts {
        let cfg = if attempt == 0 {
            config.clone()
        } else {
            config.with_tie_break(TieBreak::Random(derive_seed(
                base_seed,
                d as u64,
                attempt as u64,
            )))
        };
        let a = peg_construct(m, n, d, &cfg)?;
        if a.girth().global_girth.at_least(target_girth) {
            return Ok((a, attempt));
        }
    }
    if target_girth <= 6 {
        if let Some(a) = exhaustive_girth6(m, n, d, EXHAUSTIVE_NODE_BUDGET) {
            return Ok((a, attempts));
        }
    }
    Err(ConstructionError::ConstructionFailed {
        m,
        n,
        d,
        target: target_girth,
        attempts,
    })
}

/// Candidate-check budget for the exhaustive fallback in [`peg_with_girth`].
pub const EXHAUSTIVE_NODE_BUDGET: usize = 1_000_000;

/// Largest number of candidate supports the exhaustive fallback enumerates.
const EXHAUSTIVE_MAX_SUPPORTS: usize = 20_000;

/// Backtracking search for `n` distinct `d`-subsets of `m` rows with pairwise
/// overlap at most one (girth at least 6). Only small instances are tried:
/// `m <= 128` and at most `EXHAUSTIVE_MAX_SUPPORTS` subsets. Returns `None`
/// when no such family exists or the node budget runs out.
pub fn exhaustive_girth6(m: usize, n: usize, d: usize, node_budget: usize) -> Option<SensingMatrix> {
    if m > 128 || d == 0 || d > m || n == 0 || !binomial_at_most(m, d, EXHAUSTIVE_MAX_SUPPORTS) {
        return None;
    }
    let mut masks = Vec::new();
    let mut comb: Vec<usize> = (0..d).collect();
    loop {
        masks.push(comb.iter().fold(0u128, |acc, &r| acc | (1u128 << r)));
        let Some(i) = (0..d).rev().find(|&i| comb[i] < m - d + i) else {
            break;
        };
        comb[i] += 1;
        for j in (i + 1)..d {
            comb[j] = comb[j - 1] + 1;
        }
    }
    if masks.len() < n {
        return None;
    }
    // column 0 can be taken as {0..d-1} without loss of generality
    let mut chosen = vec![0usize];
    let mut next = 1usize;
    let mut nodes = 0usize;
    while chosen.len() < n {
        if nodes > node_budget {
            return None;
        }
        let found = (next..masks.len()).find(|&i| {
            nodes += 1;
            chosen
                .iter()
                .all(|&j| (masks[i] & masks[j]).count_ones() <= 1)
        });
        match found {
            Some(i) => {
                chosen.push(i);
                next = i + 1;
            }
            None => {
                if chosen.len() == 1 {
                    return None;
                }
                next = chosen.pop().unwrap() + 1;
            }
        }
    }
    let supports: Vec<Vec<usize>> = chosen
        .iter()
        .map(|&i| (0..m).filter(|&r| masks[i] >> r & 1 == 1).collect())
        .collect();
    SensingMatrix::from_supports(m, n, d, supports).ok()
}

fn binomial_at_most(n: usize, k: usize, limit: usize) -> bool {
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc * (n - i) as u128 / (i + 1) as u128;
        if acc > limit as u128 {
            return false;
        }
    }
    true
}

fn binomial_at_least(n: usize, k: usize, target: usize) -> bool {
    // C(n, k) >= target, stopping early once it is
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc * (n - i) as u128 / (i + 1) as u128;
        if acc >= target as u128 {
            return true;
        }
    }
    acc >= target as u128
}

/// Uniform random regular binary matrix: every column support is an
/// independent uniform `d`-subset, redrawn if it repeats an earlier column.
pub fn random_regular(
    m: usize,
    n: usize,
    d: usize,
    seed: u64,
) -> Result<SensingMatrix, ConstructionError> {
    let mut rng = rng_from_seed(seed);
    random_regular_with(&mut rng, m, n, d)
}

pub(crate) fn random_regular_with<R: Rng + ?Sized>(
    rng: &mut R,
    m: usize,
    n: usize,
    d: usize,
) -> Result<SensingMatrix, ConstructionError> {
    if d == 0 || d > m {
        return Err(MatrixError::InvalidDegree { m, d }.into());
    }
    if n >= 2 && !binomial_at_least(m, d, n) {
        // fewer than n distinct supports exist
        return Err(MatrixError::DuplicateColumn { first: 0, second: 1 }.into());
    }
    let mut scratch: Vec<usize> = (0..m).collect();
    let mut seen = HashSet::with_capacity(n);
    let mut supports = Vec::with_capacity(n);
    while supports.len() < n {
        let s = sample_subset(rng, &mut scratch, d);
        if seen.insert(s.clone()) {
            supports.push(s);
        }
    }
    Ok(SensingMatrix::from_supports(m, n, d, supports)?)
}

/// Dense Gaussian matrix with i.i.d. `N(0, 1/M)` entries.
pub fn gaussian_matrix(m: usize, n: usize, seed: u64) -> DenseMatrix {
    let mut rng = rng_from_seed(seed);
    gaussian_matrix_with(&mut rng, m, n)
}

pub(crate) fn gaussian_matrix_with<R: Rng + ?Sized>(rng: &mut R, m: usize, n: usize) -> DenseMatrix {
    let scale = 1.0 / (m as f64).sqrt();
    let data = (0..m * n)
        .map(|_| {
            let z: f64 = StandardNormal.sample(rng);
            z * scale
        })
        .collect();
    DenseMatrix::from_col_major(m, n, data)
}

#[derive(Debug, Clone)]
pub struct DmaxResult {
    pub d_max: usize,
    pub matrix: SensingMatrix,
    pub theoretical_bound: usize,
    /// `(d, restarts used)` for every degree that reached girth >= 6.
    pub attempts: Vec<(usize, usize)>,
}

/// Largest degree for which PEG (with restarts) reaches girth >= 6.
///
/// Scans `d = 2, 3, ...` upward and stops at the first degree that fails
/// within the restart budget, or at the theoretical bound.
pub fn find_dmax(m: usize, n: usize, config: &PegConfig) -> Result<DmaxResult, ConstructionError> {
    let theoretical_bound = dmax_theoretical_bound(m as u64, n as u64) as usize;
    let upper = theoretical_bound.min(m.saturating_sub(2));
    let mut best: Option<(usize, SensingMatrix)> = None;
    let mut attempts = Vec::new();
    for d in 2..=upper {
        match peg_with_girth(m, n, d, 6, config) {
            Ok((a, used)) => {
                attempts.push((d, used));
                best = Some((d, a));
            }
            Err(ConstructionError::ConstructionFailed { .. }) => break,
            Err(e) => return Err(e),
        }
    }
    let (d_max, matrix) = best.ok_or(ConstructionError::ConstructionFailed {
        m,
        n,
        d: 2,
        target: 6,
        attempts: 1 + config.max_retries,
    })?;
    Ok(DmaxResult {
        d_max,
        matrix,
        theoretical_bound,
        attempts,
    })
}
