//! Sparse-grid Hermite interpolation on the infinite-dimensional parameter
//! domain.
//!
//! The univariate difference operators from [`crate::hermite`] tensorize to
//! operators `Delta_s` indexed by a multi-index `s`. Summing `Delta_s` over a
//! downward-closed set `Lambda` gives the interpolation operator `I_Lambda`.
//! Expanding each difference by inclusion-exclusion turns `I_Lambda` into a
//! linear sampling algorithm: a signed sum of full tensor interpolants
//! `I_{s-e}`, each reading the target function only on its grid `pi_{s-e}`
//! of Hermite nodes. [`SparseInterpolant`] stores that expansion together
//! with a ledger of the sample points used.
//!
//! [`multilevel_interpolate`] stacks one such operator per dyadic spatial
//! level, with the per-level index sets shrinking geometrically in the
//! level.

mod multilevel;
mod operator;
mod tensor;

pub use multilevel::{
    comp_weight, level_count, multilevel_interpolate, DeltaSource, LevelPiece,
    MultilevelInterpolant,
};
pub use operator::{
    delta_tensor, interpolate_set, tensor_interpolant, GridPoint, SparseInterpolant,
};
pub use tensor::delta_eval_sequential;

/// Value space of an interpolated function: zero, in-place `a*x` updates and
/// a finiteness check. Scalars cover plain functions; coefficient vectors
/// cover finite-element functions interpolated coefficient-wise against a
/// shared set of parametric sample points.
pub trait LinearValue: Clone {
    fn zero_like(&self) -> Self;
    /// `self += a * x`.
    fn axpy(&mut self, a: f64, x: &Self);
    fn all_finite(&self) -> bool;
}

impl LinearValue for f64 {
    fn zero_like(&self) -> Self {
        0.0
    }

    fn axpy(&mut self, a: f64, x: &Self) {
        *self += a * x;
    }

    fn all_finite(&self) -> bool {
        self.is_finite()
    }
}

impl LinearValue for Vec<f64> {
    fn zero_like(&self) -> Self {
        vec![0.0; self.len()]
    }

    fn axpy(&mut self, a: f64, x: &Self) {
        assert_eq!(self.len(), x.len(), "value dimensions must agree");
        for (s, &v) in self.iter_mut().zip(x) {
            *s += a * v;
        }
    }

    fn all_finite(&self) -> bool {
        self.iter().all(|v| v.is_finite())
    }
}
