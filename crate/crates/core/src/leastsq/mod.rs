//! Weighted least-squares recovery on a Hermite GPC basis.
//!
//! Three stages, each usable on its own:
//!
//! 1. [`build_density`] assembles the sampling density: an equal-weight
//!    Christoffel mixture over the `m` basis functions, averaged with a
//!    sigma-weighted mixture over a truncated tail of the remaining index
//!    family. [`christoffel_density`] is the tail-free fallback.
//! 2. [`draw_batch`] draws i.i.d. points from that density with splittable
//!    per-point RNG streams and records the reciprocal density as the
//!    sample weight.
//! 3. [`lsq_fit`] solves the weighted least-squares projection onto the
//!    basis span by column-pivoted QR, sharing one factorization across all
//!    right-hand-side columns of a vector-valued target.
//!
//! [`estimate_l2_error`] is the companion Monte Carlo norm estimator used
//! to measure recovery errors in the Gaussian `L2` sense.

mod density;
mod fit;
mod sampling;

pub use density::{build_density, christoffel_density, DensitySpec};
pub use fit::{lsq_fit, LsqFit};
pub use sampling::{
    draw_batch, estimate_l2_error, estimate_l2_error_with, L2Estimate, SampleBatch,
};

use crate::hermite::hermite_eval;
use crate::multiindex::MultiIndex;

/// Tensor-product Hermite basis function `H_s(y) = prod_j H_{s_j}(y_j)`.
///
/// Coordinate `j` reads slice position `j - 1`; positions beyond the end of
/// `y` read as zero, matching the padding convention of the sample points.
pub fn hermite_tensor(s: &MultiIndex, y: &[f64]) -> f64 {
    let mut prod = 1.0;
    for (j, t) in s.iter() {
        let yj = y.get(j as usize - 1).copied().unwrap_or(0.0);
        prod *= hermite_eval(t, yj);
    }
    prod
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tensor_basis_handles_short_and_long_slices() {
        let s = MultiIndex::from_pairs([(1, 1), (3, 2)]).unwrap();
        let y = [0.7, -4.0, 1.1];
        let expect = hermite_eval(1, 0.7) * hermite_eval(2, 1.1);
        assert_eq!(hermite_tensor(&s, &y), expect);
        // missing trailing coordinate reads as zero
        let expect_short = hermite_eval(1, 0.7) * hermite_eval(2, 0.0);
        assert_eq!(hermite_tensor(&s, &y[..1]), expect_short);
        assert_eq!(hermite_tensor(&MultiIndex::zero(), &y), 1.0);
    }
}
