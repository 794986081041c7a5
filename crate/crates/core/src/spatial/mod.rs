//! One-dimensional dyadic finite element surrogate for the parametric
//! diffusion problem `-(a(y) u')' = f` on (0,1) with zero boundary values
//! and a log-normal coefficient `a(x, y) = exp(sum_j y_j psi_j(x))`.
//!
//! The pieces:
//!
//! * [`SpatialHierarchy`]: nested uniform meshes, the interpolation
//!   operators `P_k` onto them, the detail operators `delta_k` in the
//!   merged nodal frame, and H1 seminorms for error measurement.
//! * [`ParametricField`]: the truncated log-normal coefficient with
//!   amplitudes `c j^-theta`.
//! * [`assemble_and_solve`]: banded Galerkin solve at one level, producing
//!   a [`PdeSolution`] that can be evaluated anywhere in [0, 1].
//!
//! The merged detail frame stores plain nodal values, fine level first;
//! the sign convention (coarse basis functions negated) lives in the
//! evaluation routines, so vectors of sampled details can be combined
//! linearly by parametric interpolation and evaluated afterwards.

mod field;
mod mesh;
mod solve;

pub use field::{
    truncation_for_tolerance, ParametricField, ProblemConfig, DEFAULT_TRUNCATION,
};
pub use mesh::SpatialHierarchy;
pub use solve::{assemble_and_solve, evaluate_solution, PdeSolution};
