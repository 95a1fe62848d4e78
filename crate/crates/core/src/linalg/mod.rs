//! Dense linear algebra: the matrix type, magnitude-ordered symmetric
//! eigensolvers, PSD square roots and ridge solvers.

pub(crate) mod eigen;
mod matrix;
mod ridge;

pub use eigen::{
    fix_sign, lanczos_topk, magnitude_order, psd_sqrt_and_pinv_sqrt, sym_eig_all, sym_eig_topk,
    sym_eigenvalues_desc, EigMethod, LanczosOptions, SymEigResult, AUTO_DENSE_MAX_DIM,
    DEFAULT_RANK_TOL, SYMMETRY_TOL, TIE_TOL,
};
pub use matrix::{axpy, dot, mean, norm, variance, DenseMatrix};
pub(crate) use matrix::gemm;
pub use ridge::{default_ridge_grid, log_grid, ridge_cv, ridge_solve, RidgeCvResult};
