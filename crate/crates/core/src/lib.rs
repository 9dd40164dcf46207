//! Space-time least-squares finite elements for scalar hyperbolic balance laws.
//!
//! The flux of the unknown is split into a gradient part, carrying all given data
//! (source and inflow values), and a rotated-gradient part. The resulting
//! first-order system is minimized over continuous Lagrange spaces by a damped
//! Gauss-Newton iteration with nested iteration across uniform refinements.
//!
//! Coordinates are `(t, x)` throughout: `grad v = [d_t v, d_x v]` and
//! `curl v = [d_x v, -d_t v]`.

pub mod diagnostics;
pub mod error;
pub mod exact;
pub mod forms;
pub mod gn;
pub mod linalg;
pub mod mesh;
pub mod output;
pub mod problem;
pub mod quadrature;
pub mod space;

pub use error::{Error, Result};
