//! Bipartite (Tanner) graph of a binary matrix and its girth.
//!
//! Variable nodes are matrix columns, measurement nodes are rows. An edge
//! joins column `j` and row `i` whenever entry `(i, j)` is nonzero.

use std::cmp::Ordering;
use std::collections::VecDeque;
use std::fmt;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GraphError {
    #[error("column {column}: row index {index} out of range for {num_rows} rows")]
    IndexOutOfRange {
        column: usize,
        index: usize,
        num_rows: usize,
    },
    #[error("column {column}: row index {index} listed twice")]
    DuplicateEdge { column: usize, index: usize },
    #[error("column {column} has an empty support")]
    EmptyColumn { column: usize },
}

/// Length of a shortest cycle, or `Infinite` when there is none.
///
/// Ordered so that every finite length compares below `Infinite`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(into = "Option<usize>", from = "Option<usize>")]
pub enum Girth {
    Finite(usize),
    Infinite,
}

impl Girth {
    pub fn is_finite(self) -> bool {
        matches!(self, Girth::Finite(_))
    }

    pub fn finite(self) -> Option<usize> {
        match self {
            Girth::Finite(g) => Some(g),
            Girth::Infinite => None,
        }
    }

    /// True when the girth is at least `g` (infinite girth exceeds everything).
    pub fn at_least(self, g: usize) -> bool {
        match self {
            Girth::Finite(v) => v >= g,
            Girth::Infinite => true,
        }
    }
}

impl From<Girth> for Option<usize> {
    fn from(g: Girth) -> Self {
        g.finite()
    }
}

impl From<Option<usize>> for Girth {
    fn from(v: Option<usize>) -> Self {
        v.map_or(Girth::Infinite, Girth::Finite)
    }
}

impl Ord for Girth {
    fn cmp(&self, other: &Self) -> Ordering {
        match (self, other) {
            (Girth::Finite(a), Girth::Finite(b)) => a.cmp(b),
            (Girth::Finite(_), Girth::Infinite) => Ordering::Less,
            (Girth::Infinite, Girth::Finite(_)) => Ordering::Greater,
            (Girth::Infinite, Girth::Infinite) => Ordering::Equal,
        }
    }
}

impl PartialOrd for Girth {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for Girth {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Girth::Finite(g) => write!(f, "{g}"),
            Girth::Infinite => write!(f, "inf"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GirthReport {
    pub global_girth: Girth,
    /// Shortest cycle through each variable node.
    pub local_girth: Vec<Girth>,
}

/// Immutable bipartite graph with sorted adjacency lists on both sides.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BipartiteGraph {
    var_adj: Vec<Vec<usize>>,
    meas_adj: Vec<Vec<usize>>,
}

impl BipartiteGraph {
    /// Builds the graph of an `num_rows x supports.len()` binary matrix whose
    /// column `j` is nonzero exactly at the rows in `supports[j]`.
    pub fn new(num_rows: usize, supports: &[Vec<usize>]) -> Result<Self, GraphError> {
        let mut var_adj = Vec::with_capacity(supports.len());
        let mut meas_adj = vec![Vec::new(); num_rows];
        for (column, support) in supports.iter().enumerate() {
            if support.is_empty() {
                return Err(GraphError::EmptyColumn { column });
            }
            let mut rows = support.clone();
            rows.sort_unstable();
            for w in rows.windows(2) {
                if w[0] == w[1] {
                    return Err(GraphError::DuplicateEdge {
                        column,
                        index: w[0],
                    });
                }
            }
            for &index in &rows {
                if index >= num_rows {
                    return Err(GraphError::IndexOutOfRange {
                        column,
                        index,
                        num_rows,
                    });
                }
                // columns are visited in ascending order, so meas_adj stays sorted
                meas_adj[index].push(column);
            }
            var_adj.push(rows);
        }
        Ok(BipartiteGraph { var_adj, meas_adj })
    }

    pub fn num_variable_nodes(&self) -> usize {
        self.var_adj.len()
    }

    pub fn num_measurement_nodes(&self) -> usize {
        self.meas_adj.len()
    }

    pub fn num_edges(&self) -> usize {
        self.var_adj.iter().map(Vec::len).sum()
    }

    pub fn variable_neighbors(&self, v: usize) -> &[usize] {
        &self.var_adj[v]
    }

    pub fn measurement_neighbors(&self, c: usize) -> &[usize] {
        &self.meas_adj[c]
    }

    pub fn variable_degrees(&self) -> Vec<usize> {
        self.var_adj.iter().map(Vec::len).collect()
    }

    pub fn measurement_degrees(&self) -> Vec<usize> {
        self.meas_adj.iter().map(Vec::len).collect()
    }

    /// Maximum BFS depth explored from any root; longer cycles read as infinite.
    pub fn depth_cap(&self) -> usize {
        let n = self.num_variable_nodes().max(2) as f64;
        2 * n.log2().ceil() as usize + 4
    }

    /// Local girth of every variable node and the global minimum.
    pub fn girth(&self) -> GirthReport {
        let cap = self.depth_cap();
        let local_girth: Vec<Girth> = (0..self.num_variable_nodes())
            .into_par_iter()
            .map(|v| self.local_girth_capped(v, cap))
            .collect();
        let global_girth = local_girth.iter().copied().min().unwrap_or(Girth::Infinite);
        GirthReport {
            global_girth,
            local_girth,
        }
    }

    pub fn local_girth(&self, v: usize) -> Girth {
        self.local_girth_capped(v, self.depth_cap())
    }

    /// Shortest cycle through variable node `root`.
    ///
    /// Nodes are tagged with the root edge (branch) they descend from. A
    /// non-tree edge joining two different branches closes a cycle through
    /// the root of length `depth(x) + depth(y) + 1`, and the minimum over such
    /// edges is exactly the local girth.
    fn local_girth_capped(&self, root: usize, depth_cap: usize) -> Girth {
        let n = self.num_variable_nodes();
        // node ids: variables 0..n, measurements n..n+m
        let total = n + self.num_measurement_nodes();
        let mut depth = vec![usize::MAX; total];
        let mut branch = vec![usize::MAX; total];
        let mut parent = vec![usize::MAX; total];
        let mut queue = VecDeque::new();

        depth[root] = 0;
        for (b, &c) in self.var_adj[root].iter().enumerate() {
            let id = n + c;
            depth[id] = 1;
            branch[id] = b;
            parent[id] = root;
            queue.push_back(id);
        }

        let mut best = usize::MAX;
        while let Some(x) = queue.pop_front() {
            let dx = depth[x];
            // any cycle closed from here has length >= 2*dx
            if 2 * dx >= best || dx >= depth_cap {
                break;
            }
            let neighbors: &[usize] = if x < n {
                &self.var_adj[x]
            } else {
                &self.meas_adj[x - n]
            };
            for &nb in neighbors {
                let y = if x < n { n + nb } else { nb };
                if y == parent[x] {
                    continue;
                }
                if depth[y] == usize::MAX {
                    depth[y] = dx + 1;
                    branch[y] = branch[x];
                    parent[y] = x;
                    queue.push_back(y);
                } else if y != root && branch[y] != branch[x] {
                    best = best.min(dx + depth[y] + 1);
                }
            }
        }
        if best == usize::MAX {
            Girth::Infinite
        } else {
            Girth::Finite(best)
        }
    }
}
