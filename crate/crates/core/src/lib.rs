//! Sparse binary sensing matrices with girth constraints.
//!
//! * [`construction`] builds matrices (progressive edge growth, random
//!   regular, Gaussian) and searches for the largest girth-6 degree.
//! * [`matrix`] and [`graph`] hold the support-form matrix, its overlap
//!   spectrum, Gram blocks, file format, and bipartite-graph girth.
//! * [`theory`] evaluates the closed-form correlation laws and restricted
//!   isometry constants exactly.
//! * [`spectral`] checks the eigenvalue bounds numerically on sampled Gram
//!   blocks.
//! * [`recovery`] implements OMP, IHT, SP and basis pursuit.
//! * [`bench`] runs seeded Monte Carlo recovery experiments.

pub mod bench;
pub mod construction;
pub mod graph;
pub mod linalg;
pub mod matrix;
pub mod recovery;
pub mod rng;
pub mod spectral;
pub mod theory;

pub use construction::{
    find_dmax, gaussian_matrix, peg_construct, peg_with_girth, random_regular, ConstructionError,
    DmaxResult, PegConfig, TieBreak,
};
pub use graph::{BipartiteGraph, Girth, GirthReport};
pub use linalg::DenseMatrix;
pub use matrix::{CorrelationSpectrum, GramSubmatrix, MatrixError, SensingMatrix};
pub use recovery::{Operator, RecoveryError, RecoveryOutput, SensingOperator, SparseSignal};
