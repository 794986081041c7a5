//! Univariate Lagrange interpolation at Hermite roots and the difference
//! operators between consecutive degrees.

use crate::error::{Error, Result};
use crate::hermite::roots::{hermite_roots, NodeRow};
use crate::hermite::two_sum;
use std::sync::Arc;

/// Degree-m interpolant stored as node values plus the shared root row.
/// Evaluation uses the second barycentric form, which reproduces the node
/// values exactly and costs O(m) per point.
///
/// Node values carry an optional second limb (`values_lo`) so callers that
/// know their data beyond f64 precision (polynomial oracles mostly) are not
/// capped by the data's rounding; ordinary construction leaves it zero.
#[derive(Debug, Clone)]
pub struct UnivariateInterpolant {
    row: Arc<NodeRow>,
    values: Vec<f64>,
    values_lo: Vec<f64>,
}

impl UnivariateInterpolant {
    pub fn degree(&self) -> u32 {
        self.row.degree()
    }

    /// Node values in increasing-node order.
    pub fn node_values(&self) -> &[f64] {
        &self.values
    }

    pub fn eval(&self, y: f64) -> f64 {
        let roots = self.row.roots();
        let bary = self.row.bary();
        let bary_lo = self.row.bary_lo();
        if roots.len() == 1 {
            return self.values[0];
        }
        // Node values of monomial-like functions can reach 1e13 at the
        // extreme roots while the target value is order one, so the sums
        // below cancel by up to eight digits. Every rounding error with a
        // first-order effect is tracked: the node subtraction, the division,
        // the product, the additions, and the low limbs of the weights and
        // values.
        let mut num = 0.0;
        let mut num_lo = 0.0;
        let mut den = 0.0;
        let mut den_lo = 0.0;
        for i in 0..roots.len() {
            let (dy, dy_err) = two_sum(y, -roots[i]);
            if dy == 0.0 {
                return self.values[i];
            }
            let t = bary[i] / dy;
            let t_err =
                -t.mul_add(dy, -bary[i]) / dy + (bary_lo[i] - t * dy_err) / dy;
            let v = self.values[i];
            let p = t * v;
            let p_err = t.mul_add(v, -p) + (t_err * v + t * self.values_lo[i]);
            let (s, e) = two_sum(num, p);
            num = s;
            num_lo += e + p_err;
            let (s, e) = two_sum(den, t);
            den = s;
            den_lo += e + t_err;
        }
        (num + num_lo) / (den + den_lo)
    }
}

/// Interpolates `f` at the `m + 1` roots of `H_{m+1}`.
pub fn interpolate_1d<F: FnMut(f64) -> f64>(m: u32, mut f: F) -> Result<UnivariateInterpolant> {
    interpolate_1d_dd(m, |y| (f(y), 0.0))
}

/// Like [`interpolate_1d`] for data known in two f64 limbs (value, low part).
pub fn interpolate_1d_dd<F: FnMut(f64) -> (f64, f64)>(
    m: u32,
    mut f: F,
) -> Result<UnivariateInterpolant> {
    let row = hermite_roots(m)?;
    let mut values = Vec::with_capacity(row.roots().len());
    let mut values_lo = Vec::with_capacity(row.roots().len());
    for &y in row.roots() {
        let (v, v_lo) = f(y);
        if !v.is_finite() || !v_lo.is_finite() {
            return Err(Error::NonFinite(format!(
                "function value {v} at interpolation node {y} (degree {m})"
            )));
        }
        values.push(v);
        values_lo.push(v_lo);
    }
    Ok(UnivariateInterpolant {
        row,
        values,
        values_lo,
    })
}

/// The difference `I_m - I_{m-1}` applied to `f`, with `I_{-1} = 0` so that
/// the degree-0 difference is `I_0` itself.
#[derive(Debug, Clone)]
pub struct DeltaInterpolant {
    upper: UnivariateInterpolant,
    lower: Option<UnivariateInterpolant>,
}

impl DeltaInterpolant {
    pub fn degree(&self) -> u32 {
        self.upper.degree()
    }

    pub fn eval(&self, y: f64) -> f64 {
        match &self.lower {
            Some(lo) => self.upper.eval(y) - lo.eval(y),
            None => self.upper.eval(y),
        }
    }

    pub fn upper(&self) -> &UnivariateInterpolant {
        &self.upper
    }

    pub fn lower(&self) -> Option<&UnivariateInterpolant> {
        self.lower.as_ref()
    }
}

/// Builds `(I_m - I_{m-1}) f`, evaluating `f` at the nodes of both degrees.
pub fn delta_1d<F: FnMut(f64) -> f64>(m: u32, mut f: F) -> Result<DeltaInterpolant> {
    let upper = interpolate_1d(m, &mut f)?;
    let lower = if m == 0 {
        None
    } else {
        Some(interpolate_1d(m - 1, &mut f)?)
    };
    Ok(DeltaInterpolant { upper, lower })
}

/// Cardinal basis polynomial `L_{m;k}(y)` for signed node index `k`.
pub fn lagrange_basis(m: u32, k: i32, y: f64) -> Result<f64> {
    let row = hermite_roots(m)?;
    let pos = row.position(k)?;
    let roots = row.roots();
    let bary = row.bary();
    let mut den = 0.0;
    let mut hit = None;
    for i in 0..roots.len() {
        let dy = y - roots[i];
        if dy == 0.0 {
            hit = Some(i);
            break;
        }
        den += bary[i] / dy;
    }
    if let Some(i) = hit {
        return Ok(if i == pos { 1.0 } else { 0.0 });
    }
    Ok(bary[pos] / (y - roots[pos]) / den)
}
