//! Roots of `H_{m+1}` via the Jacobi matrix, with the signed node indexing
//! used throughout the interpolation operators.
//!
//! The m+1 roots are the eigenvalues of the symmetric tridiagonal matrix
//! with zero diagonal and off-diagonal entries `sqrt(1), ..., sqrt(m)`.
//! They are addressed by signed indices: degree m has nodes `y_{m;k}` for
//! `k` in `-m/2 ..= m/2` when m is even (including `y_{m;0} = 0`), and
//! `k` in `{-(m+1)/2, ..., -1, 1, ..., (m+1)/2}` when m is odd.

use crate::error::{Error, Result};
use crate::hermite::{hermite_eval, two_sum};
use std::collections::HashMap;
use std::sync::{Arc, OnceLock, RwLock};

/// Degrees above this are still served, just not retained in the cache.
pub const DEFAULT_CACHED_DEGREE: u32 = 64;

/// Roots of `H_{m+1}` together with barycentric weights.
///
/// The weights are kept in double-double form (`bary + bary_lo`). The ratio
/// form amplifies weight perturbations by the spread of the node values,
/// which reaches 1e8 for monomial data near the top degree, so single f64
/// weights would cost several digits there.
#[derive(Debug, Clone)]
pub struct NodeRow {
    m: u32,
    roots: Vec<f64>,
    bary: Vec<f64>,
    bary_lo: Vec<f64>,
}

impl NodeRow {
    /// Solves the Jacobi eigenproblem for degree `m` and symmetrizes the
    /// spectrum. Exposed through [`hermite_roots`]; direct construction is
    /// useful in tests that bypass the cache.
    pub fn build(m: u32) -> Result<Self> {
        let n = m as usize + 1;
        let mut d = vec![0.0f64; n];
        let mut e: Vec<f64> = (0..n).map(|i| (i as f64).sqrt()).collect();
        tridiag_eigenvalues(&mut d, &mut e)
            .map_err(|_| Error::Solver(format!("root solve for degree {m} did not converge")))?;
        d.sort_by(|a, b| a.partial_cmp(b).expect("eigenvalues are finite"));

        // Enforce the exact +/- symmetry the matrix has in exact arithmetic.
        for i in 0..n / 2 {
            let a = 0.5 * (d[n - 1 - i] - d[i]);
            d[i] = -a;
            d[n - 1 - i] = a;
        }
        if n % 2 == 1 {
            d[n / 2] = 0.0;
        }

        // Polish with Newton using H'_{m+1} = sqrt(m+1) H_m, then restore
        // the exact symmetry the steps may have perturbed.
        let dscale = ((m + 1) as f64).sqrt();
        for r in d.iter_mut() {
            for _ in 0..2 {
                *r -= hermite_eval(m + 1, *r) / (dscale * hermite_eval(m, *r));
            }
        }
        for i in 0..n / 2 {
            let a = 0.5 * (d[n - 1 - i] - d[i]);
            d[i] = -a;
            d[n - 1 - i] = a;
        }
        if n % 2 == 1 {
            d[n / 2] = 0.0;
        }

        for w in d.windows(2) {
            if !(w[0] < w[1]) {
                return Err(Error::Solver(format!(
                    "degree {m} roots not strictly increasing"
                )));
            }
        }
        // Accuracy check: the Newton correction |H/H'| estimates the distance
        // to the true root. The raw residual is not a usable criterion at
        // larger degrees because |H'| grows like exp(r^2/4) near the extreme
        // roots, swamping any f64-representable root.
        for &r in &d {
            let correction = hermite_eval(m + 1, r) / (dscale * hermite_eval(m, r));
            if !(correction.abs() < 1e-10) {
                return Err(Error::Solver(format!(
                    "degree {m} root {r} off by {correction:.3e}"
                )));
            }
        }

        // Barycentric weights 1 / prod_{j != i} (y_i - y_j) for the stored
        // node set, in double-double so each weight is correct to ~1 ulp.
        // Analytic shortcuts (1/H'_{m+1} at the roots) hold only for the
        // exact roots; their ~1e-15 mismatch against the rounded nodes
        // breaks polynomial exactness at the 1e-9 level.
        let mut bary = Vec::with_capacity(n);
        let mut bary_lo = Vec::with_capacity(n);
        for i in 0..n {
            let mut hi = 1.0f64;
            let mut lo = 0.0f64;
            for j in 0..n {
                if j == i {
                    continue;
                }
                let (dh, dl) = two_sum(d[i], -d[j]);
                let p = hi * dh;
                let e = hi.mul_add(dh, -p);
                let tail = hi * dl + lo * dh + e;
                let s = p + tail;
                lo = tail - (s - p);
                hi = s;
            }
            // double-double reciprocal by one Newton correction
            let q = 1.0 / hi;
            let r = -q.mul_add(hi, -1.0) - q * lo;
            let (w, w_lo) = two_sum(q, q * r);
            if !w.is_finite() {
                return Err(Error::Solver(format!(
                    "degree {m} produced a non-finite barycentric weight"
                )));
            }
            bary.push(w);
            bary_lo.push(w_lo);
        }
        Ok(NodeRow {
            m,
            roots: d,
            bary,
            bary_lo,
        })
    }

    pub fn degree(&self) -> u32 {
        self.m
    }

    /// Roots in increasing order, length `m + 1`.
    pub fn roots(&self) -> &[f64] {
        &self.roots
    }

    pub(crate) fn bary(&self) -> &[f64] {
        &self.bary
    }

    pub(crate) fn bary_lo(&self) -> &[f64] {
        &self.bary_lo
    }

    /// Signed indices in increasing node order.
    pub fn signed_indices(&self) -> impl Iterator<Item = i32> + '_ {
        (0..self.roots.len()).map(|pos| self.signed_index(pos))
    }

    /// Signed index of the node at array position `pos`.
    pub fn signed_index(&self, pos: usize) -> i32 {
        let half = (self.m as i32 + 1) / 2;
        let k = pos as i32 - half;
        if self.m % 2 == 1 && k >= 0 {
            k + 1
        } else {
            k
        }
    }

    /// Array position of signed index `k`, or an error when `k` is not a
    /// valid node index for this degree.
    pub fn position(&self, k: i32) -> Result<usize> {
        let half = (self.m as i32 + 1) / 2;
        let pos = if self.m % 2 == 1 {
            if k == 0 {
                return Err(Error::invalid(format!(
                    "node index 0 does not exist for odd degree {}",
                    self.m
                )));
            }
            if k > 0 {
                k - 1 + half
            } else {
                k + half
            }
        } else {
            k + half
        };
        if pos < 0 || pos as usize >= self.roots.len() {
            return Err(Error::invalid(format!(
                "node index {k} out of range for degree {}",
                self.m
            )));
        }
        Ok(pos as usize)
    }

    /// Node `y_{m;k}`.
    pub fn node(&self, k: i32) -> Result<f64> {
        Ok(self.roots[self.position(k)?])
    }
}

/// Eigenvalues of a symmetric tridiagonal matrix by the implicit QL method
/// with Wilkinson shifts (the classic EISPACK imtql1 scheme, eigenvalues
/// only). `d` holds the diagonal and is overwritten with eigenvalues in
/// no particular order; `e[1..]` holds the off-diagonal, `e[0]` is unused.
fn tridiag_eigenvalues(d: &mut [f64], e: &mut [f64]) -> std::result::Result<(), ()> {
    let n = d.len();
    if n <= 1 {
        return Ok(());
    }
    // shift the off-diagonal down so e[i] couples d[i] and d[i+1]
    for i in 1..n {
        e[i - 1] = e[i];
    }
    e[n - 1] = 0.0;

    for l in 0..n {
        let mut iter = 0;
        loop {
            let mut m = l;
            while m < n - 1 {
                let dd = d[m].abs() + d[m + 1].abs();
                if e[m].abs() <= f64::EPSILON * dd {
                    break;
                }
                m += 1;
            }
            if m == l {
                break;
            }
            iter += 1;
            if iter > 50 {
                return Err(());
            }
            let mut g = (d[l + 1] - d[l]) / (2.0 * e[l]);
            let mut r = g.hypot(1.0);
            g = d[m] - d[l] + e[l] / (g + r.copysign(g));
            let mut s = 1.0;
            let mut c = 1.0;
            let mut p = 0.0;
            for i in (l..m).rev() {
                let mut f = s * e[i];
                let b = c * e[i];
                r = f.hypot(g);
                e[i + 1] = r;
                if r == 0.0 {
                    // negligible rotation: deflate and retry
                    d[i + 1] -= p;
                    e[m] = 0.0;
                    break;
                }
                s = f / r;
                c = g / r;
                g = d[i + 1] - p;
                f = (d[i] - g) * s + 2.0 * c * b;
                p = s * f;
                d[i + 1] = g + p;
                g = c * f - b;
            }
            if r == 0.0 {
                continue;
            }
            d[l] -= p;
            e[l] = g;
            e[m] = 0.0;
        }
    }
    Ok(())
}

/// Lazily filled table of [`NodeRow`]s, shared across threads.
pub struct RootCache {
    max_cached: u32,
    rows: RwLock<HashMap<u32, Arc<NodeRow>>>,
}

impl RootCache {
    pub fn new(max_cached: u32) -> Self {
        RootCache {
            max_cached,
            rows: RwLock::new(HashMap::new()),
        }
    }

    /// The process-wide cache used by [`hermite_roots`].
    pub fn shared() -> &'static RootCache {
        static SHARED: OnceLock<RootCache> = OnceLock::new();
        SHARED.get_or_init(|| RootCache::new(DEFAULT_CACHED_DEGREE))
    }

    /// Root row for degree `m`. Rows up to the cache bound are built once
    /// and shared; larger degrees are built on the fly.
    pub fn row(&self, m: u32) -> Result<Arc<NodeRow>> {
        if m > self.max_cached {
            return Ok(Arc::new(NodeRow::build(m)?));
        }
        if let Some(row) = self.rows.read().expect("cache lock").get(&m) {
            return Ok(Arc::clone(row));
        }
        let built = Arc::new(NodeRow::build(m)?);
        let mut guard = self.rows.write().expect("cache lock");
        Ok(Arc::clone(guard.entry(m).or_insert(built)))
    }
}

/// Cached roots of `H_{m+1}`.
pub fn hermite_roots(m: u32) -> Result<Arc<NodeRow>> {
    RootCache::shared().row(m)
}
