//! Multi-level recovery of parametric functions in Gaussian Bochner spaces.
//!
//! The crate implements two constructive sampling-recovery algorithms for
//! functions `v(x, y)` of a spatial variable `x` and an infinite Gaussian
//! parameter vector `y`, together with the machinery they share:
//!
//! * weighted threshold index sets built from coefficient decay rules
//!   ([`multiindex`]);
//! * Gauss-Hermite node tables, barycentric Lagrange interpolation and the
//!   univariate difference operators ([`hermite`]);
//! * tensorized sparse-grid interpolation over downward-closed index sets
//!   ([`sparsegrid`]);
//! * Christoffel-mixture importance sampling and weighted least-squares
//!   fitting ([`leastsq`]);
//! * a one-dimensional dyadic finite-element hierarchy with a log-normal
//!   diffusion solver ([`spatial`]);
//! * the multi-level planner and drivers combining spatial detail operators
//!   with per-level parametric recovery ([`multilevel`]);
//! * the experiment harness behind the `bochner-recover` binary ([`harness`]).

pub mod error;
pub mod hermite;
pub mod leastsq;
pub mod multiindex;
pub mod multilevel;
pub mod sparsegrid;
pub mod spatial;

pub use error::{Error, Result};
