//! Sparse and block-structured linear algebra kernels.
//!
//! Everything here is immutable after construction. Factorizations are built
//! once and applied through `&self`, so they can be shared across threads.

mod blocktri;
mod csr;
mod ilu;
pub mod mm;
mod skyline;

pub use blocktri::{block_thomas_solve, Block2, BlockTriDiagMatrix};
pub use csr::{jacobi_sweep, CsrMatrix, Permutation};
pub use ilu::IluFactorization;
pub use skyline::{reverse_cuthill_mckee, SkylineCholesky};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SparseError {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("singular pivot block at block index {0}")]
    SingularPivot(usize),
    #[error("zero pivot in ILU(0) at row {0}")]
    ZeroPivot(usize),
    #[error("zero diagonal at row {0}")]
    ZeroDiagonal(usize),
    #[error("matrix is not positive definite (pivot {pivot:e} at row {row})")]
    NotPositiveDefinite { row: usize, pivot: f64 },
    #[error("index {index} out of bounds for dimension {dim}")]
    IndexOutOfBounds { index: usize, dim: usize },
}

pub fn dot(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| a * b).sum()
}

pub fn norm2(x: &[f64]) -> f64 {
    dot(x, x).sqrt()
}

pub fn norm1(x: &[f64]) -> f64 {
    x.iter().map(|v| v.abs()).sum()
}

/// `y += alpha * x`
pub fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}
