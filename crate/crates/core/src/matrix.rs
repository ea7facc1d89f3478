//! Regular sparse binary sensing matrices in support form.
//!
//! Column `j` is nonzero exactly on `supports[j]`, each nonzero entry being
//! `1/sqrt(d)` so that every column has unit norm.

use std::fmt::Write as _;
use std::fs;
use std::io;
use std::path::Path;

use num_rational::Rational64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::{BipartiteGraph, Girth, GirthReport};

#[derive(Debug, Error)]
pub enum MatrixError {
    #[error("expected {expected} column supports, got {actual}")]
    ColumnCount { expected: usize, actual: usize },
    #[error("degree {d} invalid for {m} rows")]
    InvalidDegree { m: usize, d: usize },
    #[error("column {column} has {actual} entries, expected degree {expected}")]
    IrregularColumn {
        column: usize,
        expected: usize,
        actual: usize,
    },
    #[error("column {column}: row index {index} out of range for {m} rows")]
    IndexOutOfRange { column: usize, index: usize, m: usize },
    #[error("column {column}: row index {index} repeated")]
    DuplicateIndex { column: usize, index: usize },
    #[error("columns {first} and {second} have identical supports")]
    DuplicateColumn { first: usize, second: usize },
    #[error("column index {index} out of range for {n} columns")]
    ColumnOutOfRange { index: usize, n: usize },
    #[error("column index {index} repeated in subset")]
    DuplicateIndexInSubset { index: usize },
    #[error("column subset is empty")]
    EmptySubset,
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("inconsistent header: {0}")]
    InconsistentHeader(String),
    #[error(transparent)]
    Io(#[from] io::Error),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SensingMatrix {
    m: usize,
    n: usize,
    d: usize,
    supports: Vec<Vec<usize>>,
}

impl SensingMatrix {
    /// Validates and builds an `m x n` matrix with `d` nonzeros per column.
    ///
    /// Supports are sorted on input; they need not arrive sorted.
    pub fn from_supports(
        m: usize,
        n: usize,
        d: usize,
        supports: Vec<Vec<usize>>,
    ) -> Result<Self, MatrixError> {
        if d == 0 || d > m {
            return Err(MatrixError::InvalidDegree { m, d });
        }
        if supports.len() != n {
            return Err(MatrixError::ColumnCount {
                expected: n,
                actual: supports.len(),
            });
        }
        let mut supports = supports;
        for (column, s) in supports.iter_mut().enumerate() {
            if s.len() != d {
                return Err(MatrixError::IrregularColumn {
                    column,
                    expected: d,
                    actual: s.len(),
                });
            }
            s.sort_unstable();
            if let Some(w) = s.windows(2).find(|w| w[0] == w[1]) {
                return Err(MatrixError::DuplicateIndex {
                    column,
                    index: w[0],
                });
            }
            if let Some(&index) = s.last().filter(|&&i| i >= m) {
                return Err(MatrixError::IndexOutOfRange { column, index, m });
            }
        }
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| supports[a].cmp(&supports[b]).then(a.cmp(&b)));
        if let Some(w) = order
            .windows(2)
            .find(|w| supports[w[0]] == supports[w[1]])
        {
            return Err(MatrixError::DuplicateColumn {
                first: w[0].min(w[1]),
                second: w[0].max(w[1]),
            });
        }
        Ok(SensingMatrix { m, n, d, supports })
    }

    pub fn nrows(&self) -> usize {
        self.m
    }

    pub fn ncols(&self) -> usize {
        self.n
    }

    pub fn degree(&self) -> usize {
        self.d
    }

    pub fn supports(&self) -> &[Vec<usize>] {
        &self.supports
    }

    pub fn support(&self, j: usize) -> &[usize] {
        &self.supports[j]
    }

    /// Value of every nonzero entry.
    pub fn amplitude(&self) -> f64 {
        1.0 / (self.d as f64).sqrt()
    }

    pub fn graph(&self) -> BipartiteGraph {
        BipartiteGraph::new(self.m, &self.supports).expect("validated supports form a valid graph")
    }

    pub fn girth(&self) -> GirthReport {
        self.graph().girth()
    }

    pub fn row_degrees(&self) -> Vec<usize> {
        let mut deg = vec![0; self.m];
        for s in &self.supports {
            for &r in s {
                deg[r] += 1;
            }
        }
        deg
    }

    /// Number of rows shared by columns `a` and `b`.
    pub fn overlap(&self, a: usize, b: usize) -> usize {
        sorted_intersection_len(&self.supports[a], &self.supports[b])
    }

    /// Histogram of pairwise support overlaps.
    ///
    /// Pairs are accumulated through per-row co-occurrence lists, so the cost
    /// is proportional to the sum of squared row degrees rather than `n^2 d`.
    pub fn correlation_spectrum(&self) -> CorrelationSpectrum {
        let mut rows: Vec<Vec<usize>> = vec![Vec::new(); self.m];
        for (j, s) in self.supports.iter().enumerate() {
            for &r in s {
                rows[r].push(j);
            }
        }
        let mut overlap_counts = vec![0u64; self.d + 1];
        let mut acc = vec![0usize; self.n];
        let mut touched = Vec::new();
        for a in 0..self.n {
            for &r in &self.supports[a] {
                // rows[r] is ascending; only count partners b > a
                let start = rows[r].partition_point(|&b| b <= a);
                for &b in &rows[r][start..] {
                    if acc[b] == 0 {
                        touched.push(b);
                    }
                    acc[b] += 1;
                }
            }
            for &b in &touched {
                overlap_counts[acc[b]] += 1;
                acc[b] = 0;
            }
            touched.clear();
        }
        let n = self.n as u64;
        let pairs = n * n.saturating_sub(1) / 2;
        let correlated: u64 = overlap_counts[1..].iter().sum();
        overlap_counts[0] = pairs - correlated;
        let max_overlap = overlap_counts
            .iter()
            .rposition(|&c| c > 0)
            .filter(|_| pairs > 0)
            .unwrap_or(0);
        CorrelationSpectrum {
            degree: self.d,
            overlap_counts,
            max_overlap,
        }
    }

    /// Normalized Gram block `A_T' A_T` for the columns in `columns`.
    pub fn gram_submatrix(&self, columns: &[usize]) -> Result<GramSubmatrix, MatrixError> {
        if columns.is_empty() {
            return Err(MatrixError::EmptySubset);
        }
        let mut sorted = columns.to_vec();
        sorted.sort_unstable();
        for w in sorted.windows(2) {
            if w[0] == w[1] {
                return Err(MatrixError::DuplicateIndexInSubset { index: w[0] });
            }
        }
        if let Some(&index) = sorted.last().filter(|&&i| i >= self.n) {
            return Err(MatrixError::ColumnOutOfRange { index, n: self.n });
        }
        Ok(self.gram_unchecked(sorted))
    }

    pub(crate) fn gram_unchecked(&self, columns: Vec<usize>) -> GramSubmatrix {
        let k = columns.len();
        let mut overlaps = vec![0usize; k * k];
        for i in 0..k {
            overlaps[i * k + i] = self.d;
            for j in (i + 1)..k {
                let o = self.overlap(columns[i], columns[j]);
                overlaps[i * k + j] = o;
                overlaps[j * k + i] = o;
            }
        }
        GramSubmatrix {
            columns,
            degree: self.d,
            overlaps,
        }
    }

    /// Serializes to the plain-text matrix format.
    ///
    /// ```text
    /// M N d
    /// girth G
    /// <d ascending row indices of column 0>
    /// ...
    /// ```
    pub fn to_text(&self) -> String {
        let girth = self.girth().global_girth;
        let mut out = String::new();
        let _ = writeln!(out, "{} {} {}", self.m, self.n, self.d);
        let _ = writeln!(out, "girth {girth}");
        for s in &self.supports {
            let line: Vec<String> = s.iter().map(usize::to_string).collect();
            out.push_str(&line.join(" "));
            out.push('\n');
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self, MatrixError> {
        let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));
        let (lno, header) = lines.next().ok_or(MatrixError::Parse {
            line: 1,
            message: "missing header".into(),
        })?;
        let dims = parse_numbers(lno, header)?;
        let [m, n, d] = dims[..] else {
            return Err(MatrixError::Parse {
                line: lno,
                message: format!("expected `M N d`, got {} fields", dims.len()),
            });
        };
        let (lno, girth_line) = lines.next().ok_or(MatrixError::Parse {
            line: 2,
            message: "missing girth line".into(),
        })?;
        let declared = parse_girth_line(lno, girth_line)?;

        let mut supports = Vec::with_capacity(n);
        for (lno, line) in lines {
            if supports.len() == n {
                if line.trim().is_empty() {
                    continue;
                }
                return Err(MatrixError::InconsistentHeader(format!(
                    "line {lno}: more than {n} columns"
                )));
            }
            let rows = parse_numbers(lno, line)?;
            if rows.len() != d {
                return Err(MatrixError::InconsistentHeader(format!(
                    "line {lno}: declared degree {d} but column lists {} indices",
                    rows.len()
                )));
            }
            if rows.windows(2).any(|w| w[0] >= w[1]) {
                return Err(MatrixError::Parse {
                    line: lno,
                    message: "row indices must be strictly ascending".into(),
                });
            }
            supports.push(rows);
        }
        if supports.len() != n {
            return Err(MatrixError::InconsistentHeader(format!(
                "declared {n} columns but found {}",
                supports.len()
            )));
        }
        let matrix = SensingMatrix::from_supports(m, n, d, supports)?;
        let actual = matrix.girth().global_girth;
        if actual != declared {
            return Err(MatrixError::InconsistentHeader(format!(
                "declared girth {declared} but computed {actual}"
            )));
        }
        Ok(matrix)
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<(), MatrixError> {
        fs::write(path, self.to_text())?;
        Ok(())
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self, MatrixError> {
        Self::from_text(&fs::read_to_string(path)?)
    }
}

fn parse_numbers(line: usize, text: &str) -> Result<Vec<usize>, MatrixError> {
    text.split_whitespace()
        .map(|tok| {
            tok.parse::<usize>().map_err(|_| MatrixError::Parse {
                line,
                message: format!("invalid integer `{tok}`"),
            })
        })
        .collect()
}

fn parse_girth_line(line: usize, text: &str) -> Result<Girth, MatrixError> {
    let mut it = text.split_whitespace();
    let bad = || MatrixError::Parse {
        line,
        message: format!("expected `girth G`, got `{text}`"),
    };
    if it.next() != Some("girth") {
        return Err(bad());
    }
    let g = match it.next() {
        Some("inf") => Girth::Infinite,
        Some(v) => Girth::Finite(v.parse().map_err(|_| bad())?),
        None => return Err(bad()),
    };
    if it.next().is_some() {
        return Err(bad());
    }
    Ok(g)
}

pub(crate) fn sorted_intersection_len(a: &[usize], b: &[usize]) -> usize {
    let (mut i, mut j, mut count) = (0, 0, 0);
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                count += 1;
                i += 1;
                j += 1;
            }
        }
    }
    count
}

/// Exact distribution of pairwise column overlaps.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorrelationSpectrum {
    pub degree: usize,
    /// `overlap_counts[s]` is the number of unordered column pairs sharing `s` rows.
    pub overlap_counts: Vec<u64>,
    /// Largest overlap attained by some pair (0 when all pairs are disjoint).
    pub max_overlap: usize,
}

impl CorrelationSpectrum {
    pub fn num_pairs(&self) -> u64 {
        self.overlap_counts.iter().sum()
    }

    /// Coherence `s_max / d`.
    pub fn coherence(&self) -> Rational64 {
        Rational64::new(self.max_overlap as i64, self.degree as i64)
    }

    pub fn coherence_f64(&self) -> f64 {
        self.max_overlap as f64 / self.degree as f64
    }

    /// Fraction of pairs with nonzero overlap.
    pub fn correlated_fraction(&self) -> Rational64 {
        let pairs = self.num_pairs();
        if pairs == 0 {
            return Rational64::from_integer(0);
        }
        Rational64::new((pairs - self.overlap_counts[0]) as i64, pairs as i64)
    }

    /// True when some pair shares two or more rows, i.e. the graph has 4-cycles.
    pub fn has_four_cycles(&self) -> bool {
        self.overlap_counts.iter().skip(2).any(|&c| c > 0)
    }
}

/// Normalized Gram block over a sorted column subset.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GramSubmatrix {
    columns: Vec<usize>,
    degree: usize,
    overlaps: Vec<usize>,
}

impl GramSubmatrix {
    pub fn columns(&self) -> &[usize] {
        &self.columns
    }

    pub fn size(&self) -> usize {
        self.columns.len()
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn overlap(&self, i: usize, j: usize) -> usize {
        self.overlaps[i * self.size() + j]
    }

    pub fn entry(&self, i: usize, j: usize) -> Rational64 {
        Rational64::new(self.overlap(i, j) as i64, self.degree as i64)
    }

    /// Row-major `f64` copy.
    pub fn to_f64(&self) -> Vec<f64> {
        let d = self.degree as f64;
        self.overlaps.iter().map(|&o| o as f64 / d).collect()
    }

    /// Number of nonzero off-diagonal entries (counted in both triangles).
    pub fn offdiag_nonzeros(&self) -> usize {
        let k = self.size();
        (0..k)
            .flat_map(|i| (0..k).map(move |j| (i, j)))
            .filter(|&(i, j)| i != j && self.overlap(i, j) > 0)
            .count()
    }
}
