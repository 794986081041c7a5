//! Orthonormal probabilists' Hermite polynomials, their roots, and Lagrange
//! interpolation at those roots.
//!
//! Everything downstream (sparse grids, density construction, least-squares
//! bases) evaluates the orthonormal family `H_s` defined by
//!
//! ```text
//! H_0 = 1,   H_1(y) = y,   H_{s+1}(y) = (y H_s(y) - sqrt(s) H_{s-1}(y)) / sqrt(s+1)
//! ```
//!
//! which is orthonormal with respect to the standard Gaussian measure. Roots
//! of `H_{m+1}` come from the symmetric tridiagonal Jacobi matrix, and the
//! interpolation operators `I_m` and differences `D_m = I_m - I_{m-1}` use
//! the barycentric form at those roots.

mod interp;
mod roots;

pub use interp::{
    delta_1d, interpolate_1d, interpolate_1d_dd, lagrange_basis, DeltaInterpolant,
    UnivariateInterpolant,
};
pub use roots::{hermite_roots, NodeRow, RootCache, DEFAULT_CACHED_DEGREE};

/// Error-free sum transform: `a + b` as a rounded head plus exact tail.
#[inline]
pub(crate) fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let bb = s - a;
    (s, (a - (s - bb)) + (b - bb))
}

/// Orthonormal probabilists' Hermite polynomial `H_s(y)`.
///
/// The three-term recurrence is forward-stable for the degree range used
/// here (well past 200), so no scaling tricks are needed.
pub fn hermite_eval(s: u32, y: f64) -> f64 {
    let mut prev = 0.0;
    let mut cur = 1.0;
    for k in 0..s {
        let next = (y * cur - (k as f64).sqrt() * prev) / ((k + 1) as f64).sqrt();
        prev = cur;
        cur = next;
    }
    cur
}

/// `H_s(y)` for all degrees `0..=s_max` at once, one recurrence pass.
pub fn hermite_eval_all(s_max: u32, y: f64, out: &mut Vec<f64>) {
    out.clear();
    out.reserve(s_max as usize + 1);
    let mut prev = 0.0;
    let mut cur = 1.0;
    out.push(cur);
    for k in 0..s_max {
        let next = (y * cur - (k as f64).sqrt() * prev) / ((k + 1) as f64).sqrt();
        prev = cur;
        cur = next;
        out.push(cur);
    }
}
