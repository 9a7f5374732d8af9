//! Dense complex linear algebra: matrices, Hermitian eigendecomposition,
//! PSD projection and numerical rank.

mod eig;
mod matrix;
mod realsolve;

pub use eig::{eig_hermitian, numerical_rank, psd_project, EigDecomposition, RANK_TOL};
pub use matrix::{frobenius_inner, ComplexMatrix, HermitianMatrix, HERM_TOL};
pub(crate) use eig::jacobi;
pub(crate) use realsolve::RowSpace;
