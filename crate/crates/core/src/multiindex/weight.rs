//! Weight systems and the `sigma` weights they induce on multi-indices.
//!
//! A weight system packages a positive non-increasing coefficient sequence
//! `b_j` (given by a closed-form decay rule), a summability exponent
//! `p in (0,1)`, a scale `xi > 0` and a smoothness order `eta`. It derives
//! the per-coordinate growth factors
//!
//! ```text
//! rho_j = b_j^(p-1) * xi / (4 * sqrt(eta!) * ||b||_p)
//! ```
//!
//! and assigns to each multi-index `s` the weight
//!
//! ```text
//! sigma_s^2 = sum_{s' <= s, |s'|_inf <= eta} C(s, s') prod_j rho_j^(2 s'_j),
//! ```
//!
//! which factorizes over coordinates as `sigma_s^2 = prod_j g_j(s_j)` with
//! `g_j(t) = sum_{i=0}^{min(eta,t)} C(t,i) rho_j^(2i)`. The factorized form
//! is what everything here computes; tests check it against the literal sum.
//!
//! `sigma` is non-decreasing under componentwise increase of `s` (strictly
//! increasing when `eta >= 1`), which is what makes threshold sets downward
//! closed and enumerable by depth-first search.

use crate::error::{Error, Result};
use crate::multiindex::MultiIndex;

/// Closed-form rule for the coefficient sequence `b_j`, `j >= 1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DecayRule {
    /// `b_j = scale * j^(-exponent)`
    PowerLaw { scale: f64, exponent: f64 },
    /// `b_j = scale * ratio^j`
    Geometric { scale: f64, ratio: f64 },
}

impl DecayRule {
    fn validate(&self, p: f64) -> Result<()> {
        match *self {
            DecayRule::PowerLaw { scale, exponent } => {
                if !(scale > 0.0 && scale.is_finite()) {
                    return Err(Error::invalid("power-law scale must be positive"));
                }
                if !(exponent > 0.0 && exponent.is_finite()) {
                    return Err(Error::invalid("power-law exponent must be positive"));
                }
                if exponent * p <= 1.0 {
                    return Err(Error::invalid(format!(
                        "b is not l^p-summable: exponent*p = {} <= 1",
                        exponent * p
                    )));
                }
            }
            DecayRule::Geometric { scale, ratio } => {
                if !(scale > 0.0 && scale.is_finite()) {
                    return Err(Error::invalid("geometric scale must be positive"));
                }
                if !(ratio > 0.0 && ratio < 1.0) {
                    return Err(Error::invalid("geometric ratio must lie in (0,1)"));
                }
            }
        }
        Ok(())
    }

    /// `b_j` (1-based).
    pub fn value(&self, j: u32) -> f64 {
        debug_assert!(j >= 1);
        match *self {
            DecayRule::PowerLaw { scale, exponent } => scale * (j as f64).powf(-exponent),
            DecayRule::Geometric { scale, ratio } => scale * ratio.powi(j as i32),
        }
    }

    /// `ln b_j`, stable for coordinates where `b_j` underflows.
    pub fn ln_value(&self, j: u32) -> f64 {
        match *self {
            DecayRule::PowerLaw { scale, exponent } => scale.ln() - exponent * (j as f64).ln(),
            DecayRule::Geometric { scale, ratio } => scale.ln() + j as f64 * ratio.ln(),
        }
    }

    /// `||b||_p = (sum_j b_j^p)^(1/p)` over the infinite sequence.
    pub fn lp_norm(&self, p: f64) -> Result<f64> {
        self.validate(p)?;
        match *self {
            DecayRule::PowerLaw { scale, exponent } => {
                Ok(scale * zeta(exponent * p).powf(1.0 / p))
            }
            DecayRule::Geometric { scale, ratio } => {
                let rp = ratio.powf(p);
                Ok(scale * (rp / (1.0 - rp)).powf(1.0 / p))
            }
        }
    }

    fn tag(&self) -> &'static str {
        match self {
            DecayRule::PowerLaw { .. } => "power-law",
            DecayRule::Geometric { .. } => "geometric",
        }
    }
}

/// Riemann zeta for real `s > 1` by Euler-Maclaurin summation.
pub(crate) fn zeta(s: f64) -> f64 {
    assert!(s > 1.0, "zeta requires s > 1");
    const J: u32 = 64;
    let mut sum = 0.0;
    for j in 1..J {
        sum += (j as f64).powf(-s);
    }
    let jf = J as f64;
    sum += jf.powf(1.0 - s) / (s - 1.0);
    sum += 0.5 * jf.powf(-s);
    sum += s * jf.powf(-s - 1.0) / 12.0;
    sum -= s * (s + 1.0) * (s + 2.0) * jf.powf(-s - 3.0) / 720.0;
    sum += s * (s + 1.0) * (s + 2.0) * (s + 3.0) * (s + 4.0) * jf.powf(-s - 5.0) / 30240.0;
    sum
}

fn factorial(n: u32) -> f64 {
    (1..=n).fold(1.0, |acc, k| acc * k as f64)
}

/// Binomial coefficient C(t, i) as f64 (i is small: at most `eta`).
fn binom(t: u32, i: u32) -> f64 {
    if i > t {
        return 0.0;
    }
    let mut c = 1.0;
    for k in 1..=i {
        c = c * (t - i + k) as f64 / k as f64;
    }
    c
}

pub(crate) fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf29ce484222325;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x100000001b3);
    }
    h
}

const LN_MAX: f64 = 709.0;

/// Coefficient decay rule plus holomorphy parameters, with the derived
/// `rho_j` growth factors.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightSystem {
    rule: DecayRule,
    p: f64,
    xi: f64,
    eta: u32,
    lp_norm: f64,
    /// `xi / (4 sqrt(eta!) ||b||_p)`; `rho_j = rho_factor * b_j^(p-1)`.
    rho_factor: f64,
}

impl WeightSystem {
    pub fn new(rule: DecayRule, p: f64, xi: f64, eta: u32) -> Result<Self> {
        if !(p > 0.0 && p < 1.0) {
            return Err(Error::invalid(format!("p must lie in (0,1), got {p}")));
        }
        if !(xi > 0.0 && xi.is_finite()) {
            return Err(Error::invalid("xi must be positive and finite"));
        }
        let lp = rule.lp_norm(p)?;
        let rho_factor = xi / (4.0 * factorial(eta).sqrt() * lp);
        Ok(WeightSystem {
            rule,
            p,
            xi,
            eta,
            lp_norm: lp,
            rho_factor,
        })
    }

    pub fn rule(&self) -> DecayRule {
        self.rule
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    /// `q = p / (1 - p)`.
    pub fn q(&self) -> f64 {
        self.p / (1.0 - self.p)
    }

    pub fn xi(&self) -> f64 {
        self.xi
    }

    pub fn eta(&self) -> u32 {
        self.eta
    }

    pub fn lp_norm(&self) -> f64 {
        self.lp_norm
    }

    /// `b_j` (1-based coordinate).
    pub fn b(&self, j: u32) -> f64 {
        self.rule.value(j)
    }

    /// `rho_j`; non-decreasing in `j`, may overflow to infinity for very deep
    /// coordinates of a geometric rule.
    pub fn rho(&self, j: u32) -> f64 {
        self.rho_factor * self.rule.value(j).powf(self.p - 1.0)
    }

    pub fn ln_rho(&self, j: u32) -> f64 {
        self.rho_factor.ln() + (self.p - 1.0) * self.rule.ln_value(j)
    }

    /// Per-coordinate factor `g_j(t) = sum_{i<=min(eta,t)} C(t,i) rho_j^(2i)`.
    /// Computed in linear arithmetic; overflows saturate to infinity, which
    /// enumeration treats as "past any threshold".
    pub fn coordinate_factor(&self, j: u32, t: u32) -> f64 {
        if t == 0 {
            return 1.0;
        }
        let rho2 = {
            let r = self.rho(j);
            r * r
        };
        let imax = self.eta.min(t);
        let mut g = 1.0;
        let mut pw = 1.0;
        for i in 1..=imax {
            pw *= rho2;
            g += binom(t, i) * pw;
            if !g.is_finite() {
                return f64::INFINITY;
            }
        }
        g
    }

    /// `ln g_j(t)` via log-sum-exp; finite even when `g_j(t)` overflows.
    pub fn log_coordinate_factor(&self, j: u32, t: u32) -> f64 {
        if t == 0 {
            return 0.0;
        }
        let two_ln_rho = 2.0 * self.ln_rho(j);
        let imax = self.eta.min(t);
        let mut terms = Vec::with_capacity(imax as usize + 1);
        for i in 0..=imax {
            terms.push(binom(t, i).ln() + i as f64 * two_ln_rho);
        }
        let m = terms.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let s: f64 = terms.iter().map(|&x| (x - m).exp()).sum();
        m + s.ln()
    }

    /// `sigma_s^2` in linear arithmetic; +inf on overflow.
    pub fn sigma_sq(&self, s: &MultiIndex) -> f64 {
        let mut prod = 1.0;
        for (j, t) in s.iter() {
            prod *= self.coordinate_factor(j, t);
            if !prod.is_finite() {
                return f64::INFINITY;
            }
        }
        prod
    }

    /// `ln sigma_s^2`, always finite for finite `rho_j`.
    pub fn log_sigma_sq(&self, s: &MultiIndex) -> f64 {
        s.iter()
            .map(|(j, t)| self.log_coordinate_factor(j, t))
            .sum()
    }

    /// `sigma_s`. Falls back to log-space evaluation when the inner sums
    /// overflow, and reports a range error if even the square root is not
    /// representable.
    pub fn sigma(&self, s: &MultiIndex) -> Result<f64> {
        let sq = self.sigma_sq(s);
        if sq.is_finite() {
            return Ok(sq.sqrt());
        }
        let half_log = 0.5 * self.log_sigma_sq(s);
        if half_log > LN_MAX {
            return Err(Error::Range(format!(
                "sigma overflows f64 for s = {s} (ln sigma = {half_log:.3e})"
            )));
        }
        Ok(half_log.exp())
    }

    /// Whether `(sigma_s^{-1})_s` is l^q-summable; requires `eta > 2/q`.
    pub fn sigma_summable_for(&self, q: f64) -> bool {
        (self.eta as f64) > 2.0 / q
    }

    /// `sum over all multi-indices s of sigma_s^{-2}`, computed through the
    /// factorization `prod_j sum_t g_j(t)^{-1}`. Infinite when `eta <= 1`.
    ///
    /// The inner sums decay like `eta! / (rho_j^{2 eta} t^eta)`, so truncating
    /// at `t0` loses roughly `term(t0) * t0 / (eta - 1)` (integral comparison).
    /// That remainder is added back once the term drops below `1e-10 * h`,
    /// leaving a relative error of order `term(t0)`, i.e. about 1e-10.
    pub fn total_inverse_sigma_sq(&self) -> Result<f64> {
        if self.eta <= 1 {
            return Ok(f64::INFINITY);
        }
        let mut prod = 1.0;
        let mut j = 1u32;
        loop {
            let mut h = 1.0;
            let mut t = 1u32;
            loop {
                let g = self.coordinate_factor(j, t);
                if !g.is_finite() {
                    break;
                }
                let term = 1.0 / g;
                h += term;
                if t > self.eta && term < 1e-10 * h {
                    h += term * t as f64 / (self.eta as f64 - 1.0);
                    break;
                }
                if t >= 10_000_000 {
                    return Err(Error::Range(format!(
                        "coordinate {j} sum did not converge (rho too small)"
                    )));
                }
                t += 1;
            }
            prod *= h;
            // The per-coordinate excess h_j - 1 decays faster than 1/j^2 for
            // any valid rule, so once it reaches 1e-13 the whole remaining
            // product contributes less than ~1e-7 relative.
            if h - 1.0 < 1e-13 {
                break;
            }
            if j >= 10_000_000 {
                return Err(Error::Range(
                    "coordinate product did not converge".to_string(),
                ));
            }
            j += 1;
        }
        Ok(prod)
    }

    /// Stable hash of the defining parameters, used for file provenance.
    pub fn fingerprint(&self) -> u64 {
        let mut bytes = Vec::with_capacity(64);
        match self.rule {
            DecayRule::PowerLaw { scale, exponent } => {
                bytes.push(1u8);
                bytes.extend_from_slice(&scale.to_bits().to_le_bytes());
                bytes.extend_from_slice(&exponent.to_bits().to_le_bytes());
            }
            DecayRule::Geometric { scale, ratio } => {
                bytes.push(2u8);
                bytes.extend_from_slice(&scale.to_bits().to_le_bytes());
                bytes.extend_from_slice(&ratio.to_bits().to_le_bytes());
            }
        }
        bytes.extend_from_slice(&self.p.to_bits().to_le_bytes());
        bytes.extend_from_slice(&self.xi.to_bits().to_le_bytes());
        bytes.extend_from_slice(&self.eta.to_le_bytes());
        fnv1a(&bytes)
    }
}

/// Test-support weight system with `rho_j = 2^j` exactly: geometric rule with
/// ratio 1/4, p = 1/2, xi = 4 sqrt(eta!).
#[cfg(test)]
pub(crate) fn dyadic_rho_ws(eta: u32) -> WeightSystem {
    let xi = 4.0 * factorial(eta).sqrt();
    WeightSystem::new(
        DecayRule::Geometric {
            scale: 1.0,
            ratio: 0.25,
        },
        0.5,
        xi,
        eta,
    )
    .unwrap()
}
