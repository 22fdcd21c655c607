//! Dense kernels: storage, products, SVD, Cholesky, fast Walsh–Hadamard
//! transform and operator-norm estimation.
//!
//! Every routine is a pure function of its inputs and safe to call from
//! multiple threads.

mod cholesky;
mod fwht;
mod matrix;
mod power;
mod svd;

pub use cholesky::{solve_psd, Cholesky};
pub use fwht::{fwht_in_place, fwht_normalized};
pub(crate) use fwht::fwht_rows_in_place;
pub use matrix::{axpy, dot, norm2, sub_vec, DenseMatrix};
pub use power::{estimate_opnorm_sq, estimate_sym_opnorm, OPNORM_SAFETY};
pub use svd::{thin_svd, SvdResult};
