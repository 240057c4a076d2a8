//! Sparse matrix storage and factorization.

pub mod cholesky;
pub mod ordering;
pub mod sparse;

pub use cholesky::{SparseCholesky, SymbolicCholesky};
pub use sparse::CscMatrix;
