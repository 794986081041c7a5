//! Weighted least-squares projection onto a tensor Hermite basis.
//!
//! The fit solves `min_g sum_i w_i |f(y_i) - g(y_i)|^2` over the span of the
//! basis by QR with column pivoting on the row-scaled design matrix
//! `A = W^{1/2} L`, `L_{ia} = H_{s_a}(y_i)`. Vector-valued targets reuse the
//! single factorization for every right-hand-side column, since the design
//! depends only on the parametric points.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::leastsq::hermite_tensor;
use crate::leastsq::sampling::SampleBatch;
use crate::multiindex::MultiIndex;

/// Relative diagonal cutoff below which a pivoted column is treated as
/// dependent and excluded from the solve.
const RANK_TOL: f64 = 1e-12;

/// Condition estimate beyond which a fit is flagged as truncated even when
/// every diagonal entry clears the rank cutoff.
const CONDITION_LIMIT: f64 = 1e12;

/// Result of one weighted least-squares solve.
///
/// `coeffs` is `m x k`: one column of basis coefficients per column of the
/// sampled target. Rank, condition and the truncation flag describe the
/// factorization; a truncated fit solved only the well-conditioned leading
/// block and zeroed the remaining pivoted-out coefficients.
#[derive(Debug, Clone)]
pub struct LsqFit {
    basis: Vec<MultiIndex>,
    coeffs: DMatrix<f64>,
    residual: Vec<f64>,
    rank: usize,
    condition: f64,
    truncated: bool,
    n: usize,
}

impl LsqFit {
    /// Basis the coefficients refer to, in column order of the design.
    pub fn basis(&self) -> &[MultiIndex] {
        &self.basis
    }

    /// Coefficient matrix, `m` rows by `k` target columns.
    pub fn coeffs(&self) -> &DMatrix<f64> {
        &self.coeffs
    }

    /// Weighted residual norm per target column,
    /// `sqrt(sum_i w_i |f(y_i) - g(y_i)|^2)`.
    pub fn residual(&self) -> &[f64] {
        &self.residual
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    /// Ratio of the extreme diagonal magnitudes of the pivoted triangular
    /// factor; infinite when the trailing entry underflows to zero.
    pub fn condition(&self) -> f64 {
        self.condition
    }

    /// True when the solve fell back to a leading block, either because a
    /// diagonal entry dropped below the rank cutoff or because the condition
    /// estimate passed the flagging limit.
    pub fn truncated(&self) -> bool {
        self.truncated
    }

    pub fn m(&self) -> usize {
        self.basis.len()
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Fitted expansion at `y`, one value per target column.
    pub fn eval(&self, y: &[f64], out: &mut Vec<f64>) {
        out.clear();
        out.resize(self.coeffs.ncols(), 0.0);
        for (a, s) in self.basis.iter().enumerate() {
            let h = hermite_tensor(s, y);
            for (c, slot) in out.iter_mut().enumerate() {
                *slot += self.coeffs[(a, c)] * h;
            }
        }
    }

    /// Scalar shortcut for single-column fits.
    pub fn eval_scalar(&self, y: &[f64]) -> f64 {
        let mut out = Vec::with_capacity(1);
        self.eval(y, &mut out);
        out[0]
    }

    /// Diagnostics record `{m, n, condition, rank, residual}` as a JSON
    /// object. A non-finite condition estimate serializes as null.
    pub fn diagnostics_json(&self) -> String {
        serde_json::json!({
            "m": self.m(),
            "n": self.n,
            "condition": self.condition,
            "rank": self.rank,
            "residual": self.residual,
        })
        .to_string()
    }
}

/// Fits the sampled target values against the basis at the batch points.
///
/// `samples` holds one row per batch point and one column per component of
/// the target; scalar targets use a single column. Requires at least as
/// many points as basis functions. A rank-deficient or badly conditioned
/// design is not an error: the solve truncates to the stable leading block
/// and the fit comes back flagged.
pub fn lsq_fit(
    batch: &SampleBatch,
    basis: &[MultiIndex],
    samples: &DMatrix<f64>,
) -> Result<LsqFit> {
    let n = batch.len();
    let m = basis.len();
    if m == 0 {
        return Err(Error::invalid("cannot fit an empty basis"));
    }
    if n < m {
        return Err(Error::contract(format!(
            "{n} sample points cannot determine {m} coefficients"
        )));
    }
    if samples.nrows() != n {
        return Err(Error::invalid(format!(
            "sample matrix has {} rows for {n} points",
            samples.nrows()
        )));
    }
    if samples.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("sampled target values".to_string()));
    }
    let k = samples.ncols();

    let mut a = DMatrix::zeros(n, m);
    let mut b = DMatrix::zeros(n, k);
    for i in 0..n {
        let w = batch.weights()[i].sqrt();
        let y = batch.point(i);
        for (col, s) in basis.iter().enumerate() {
            a[(i, col)] = w * hermite_tensor(s, y);
        }
        for c in 0..k {
            b[(i, c)] = w * samples[(i, c)];
        }
    }

    let qr = a.col_piv_qr();
    let r = qr.r();
    // pivoting orders the diagonal by magnitude, so the stable block is a
    // prefix
    let lead = r[(0, 0)];
    let mut rank = 0;
    while rank < m && r[(rank, rank)] > RANK_TOL * lead && r[(rank, rank)] > 0.0 {
        rank += 1;
    }
    let trailing = r[(m - 1, m - 1)];
    let condition = if trailing > 0.0 {
        lead / trailing
    } else {
        f64::INFINITY
    };
    let truncated = rank < m || !(condition <= CONDITION_LIMIT);

    qr.q_tr_mul(&mut b);
    // rows the projection cannot reach carry the residual
    let mut residual = vec![0.0; k];
    for (c, slot) in residual.iter_mut().enumerate() {
        let mut acc = 0.0;
        for i in rank..n {
            acc += b[(i, c)] * b[(i, c)];
        }
        *slot = acc.sqrt();
    }

    let mut x = DMatrix::zeros(m, k);
    for c in 0..k {
        for i in (0..rank).rev() {
            let mut v = b[(i, c)];
            for j in i + 1..rank {
                v -= r[(i, j)] * x[(j, c)];
            }
            x[(i, c)] = v / r[(i, i)];
        }
    }
    qr.p().inv_permute_rows(&mut x);
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::Solver(
            "least-squares coefficients are not finite".to_string(),
        ));
    }

    Ok(LsqFit {
        basis: basis.to_vec(),
        coeffs: x,
        residual,
        rank,
        condition,
        truncated,
        n,
    })
}
