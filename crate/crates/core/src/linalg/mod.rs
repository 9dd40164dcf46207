//! Sparse symmetric linear algebra.

mod cg;
mod cholesky;
mod csr;

pub use cg::{cg_solve, cg_solve_from, dot, norm};
pub use cholesky::{cholesky_solve, nested_dissection, Cholesky, Ordering};
pub use csr::CsrMatrix;
