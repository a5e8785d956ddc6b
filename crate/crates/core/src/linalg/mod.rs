//! Sparse and dense symmetric-indefinite kernels.

mod dense;
mod ldlt;
mod ordering;
mod schur;
mod sparse;

use thiserror::Error;

pub use dense::{DenseLdlt, DenseMatrix};
pub use ldlt::{Inertia, SparseLdlt};
pub use ordering::minimum_degree;
pub use schur::schur_contribution;
pub use sparse::{CscMatrix, SymTriplets};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LinalgError {
    /// Elimination hit an exactly zero or non-finite pivot; `pivot` is the
    /// row index in the matrix being factored.
    #[error("singular pivot at index {pivot}")]
    Singular { pivot: usize },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },
    #[error("matrix order {order} exceeds the dense cap {cap}")]
    TooLarge { order: usize, cap: usize },
}
