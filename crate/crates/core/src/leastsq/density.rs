//! Sampling density for the weighted least-squares projection.
//!
//! Relative to the Gaussian product measure, the density is the mixture
//!
//! ```text
//! rho(y) = 1/2 (1/m) sum_{s in basis}  prod_j H_{s_j}(y_j)^2
//!        + 1/2 (1/Z) sum_{s in tail} sigma_s^{-2} prod_j H_{s_j}(y_j)^2
//! ```
//!
//! with `Z = sum_{s in tail} sigma_s^{-2}`. The exact tail runs over the
//! whole remaining index family; here it is truncated to the first `s_max`
//! indices in sigma order (minus the basis) and renormalized by `Z`, and the
//! neglected fraction is estimated and stored as [`DensitySpec::delta_tail`]
//! rather than hidden. The first summand alone, scaled to unit mass, is the
//! plain Christoffel density of the basis; [`christoffel_density`] builds
//! that tail-free variant.
//!
//! Each mixture component factorizes over coordinates, so sampling a
//! component only needs univariate draws from `|H_t|^2 dgamma`. Those are
//! done by numeric CDF inversion on a fixed grid, one table per distinct
//! degree `t >= 1` (the density does not depend on which coordinate carries
//! the degree); degree 0 stays the plain Gaussian.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::hermite::{hermite_eval, hermite_eval_all};
use crate::multiindex::fnv1a;
use crate::multiindex::{sigma_ordered_prefix, MultiIndex, WeightSystem};

/// Nodes per inverse-CDF grid.
const TABLE_NODES: usize = 4096;

/// Rank-deficiency guard for the enumeration behind the sigma-ordered
/// prefix; generous multiple of the requested count so the threshold search
/// has room to overshoot.
fn prefix_cap(count: usize) -> usize {
    count.saturating_mul(64).max(4096)
}

/// Immutable description of the sampling density: mixture components with
/// their selection masses, the active coordinates, and the univariate
/// inversion tables. Built once, then shared by any number of batch draws.
#[derive(Debug, Clone)]
pub struct DensitySpec {
    basis: Vec<MultiIndex>,
    /// Tail indices with their `sigma^{-2}` values, sigma-ordered.
    tail: Vec<(MultiIndex, f64)>,
    tail_norm: f64,
    delta_tail: f64,
    /// Selection probability of each component, basis first.
    mass: Vec<f64>,
    /// Running sums of `mass`, last entry pinned to exactly 1.
    cum_mass: Vec<f64>,
    /// Sorted union of the supports of all components, with the largest
    /// degree seen at each coordinate.
    coord_degrees: Vec<(u32, u32)>,
    dim: usize,
    tables: BTreeMap<u32, InvCdfTable>,
    mass_defect: f64,
    fingerprint: u64,
}

impl DensitySpec {
    /// Number of basis functions `m`.
    pub fn m(&self) -> usize {
        self.basis.len()
    }

    pub fn basis(&self) -> &[MultiIndex] {
        &self.basis
    }

    /// Truncated tail with `sigma^{-2}` values, sigma-ordered.
    pub fn tail(&self) -> &[(MultiIndex, f64)] {
        &self.tail
    }

    /// `Z`, the `sigma^{-2}` sum over the truncated tail.
    pub fn tail_norm(&self) -> f64 {
        self.tail_norm
    }

    /// Estimated fraction of the exact tail mass lost to truncation,
    /// `sum_{s beyond cap} sigma_s^{-2} / sum_{s outside basis} sigma_s^{-2}`.
    /// Reported as 1 when the full sum diverges.
    pub fn delta_tail(&self) -> f64 {
        self.delta_tail
    }

    /// Largest normalization defect among the inversion tables, i.e. how far
    /// the raw grid quadrature of a component density was from unit mass.
    pub fn mass_defect(&self) -> f64 {
        self.mass_defect
    }

    /// Total number of mixture components (basis plus tail).
    pub fn component_count(&self) -> usize {
        self.mass.len()
    }

    /// Selection probability of component `c` (basis components first, then
    /// tail components in sigma order).
    pub fn component_mass(&self, c: usize) -> f64 {
        self.mass[c]
    }

    /// Multi-index of component `c`.
    pub fn component_index(&self, c: usize) -> &MultiIndex {
        if c < self.basis.len() {
            &self.basis[c]
        } else {
            &self.tail[c - self.basis.len()].0
        }
    }

    /// Coordinates some component actually depends on, ascending.
    pub fn active_coords(&self) -> impl Iterator<Item = u32> + '_ {
        self.coord_degrees.iter().map(|&(j, _)| j)
    }

    /// Length of a sample point vector: the largest active coordinate.
    /// Positions inside that range that no component touches are kept at
    /// zero by the sampler; the density never reads them.
    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Stable hash of the inputs that defined this spec, recorded in drawn
    /// batches for provenance.
    pub fn fingerprint(&self) -> u64 {
        self.fingerprint
    }

    /// Mixture density at `y`, relative to the Gaussian product measure on
    /// the active coordinates. Slice positions beyond `y.len()` read zero.
    pub fn density(&self, y: &[f64]) -> f64 {
        // one Hermite recurrence pass per active coordinate
        let mut cols: Vec<Vec<f64>> = Vec::with_capacity(self.coord_degrees.len());
        for &(j, deg) in &self.coord_degrees {
            let yj = y.get(j as usize - 1).copied().unwrap_or(0.0);
            let mut col = Vec::with_capacity(deg as usize + 1);
            hermite_eval_all(deg, yj, &mut col);
            cols.push(col);
        }
        let mut total = 0.0;
        for (c, mass) in self.mass.iter().enumerate() {
            let mut prod = *mass;
            for (j, t) in self.component_index(c).iter() {
                let pos = self
                    .coord_degrees
                    .binary_search_by_key(&j, |&(jj, _)| jj)
                    .expect("component support is inside the active union");
                let h = cols[pos][t as usize];
                prod *= h * h;
            }
            total += prod;
        }
        total
    }

    /// Component choice for a uniform variate `u` in `[0, 1)`.
    pub(crate) fn pick_component(&self, u: f64) -> usize {
        let k = self.cum_mass.partition_point(|&c| c <= u);
        k.min(self.cum_mass.len() - 1)
    }

    /// Inverse-CDF draw for one coordinate carrying degree `t >= 1`.
    pub(crate) fn invert_coordinate(&self, t: u32, u: f64) -> f64 {
        self.tables
            .get(&t)
            .expect("every nonzero component degree has a table")
            .invert(u)
    }
}

/// Builds the full mixture density for `basis` under the weight system `ws`.
///
/// The tail is the sigma-ordered prefix of the first `s_max` indices of the
/// family with the basis members removed, so `s_max` caps the *total* number
/// of indices considered, as in "the first `8 m` indices by sigma order".
/// Requires `s_max >= basis.len()`; a tail that comes out empty (every
/// considered index is already in the basis) is reported as
/// [`Error::DegenerateDensity`], with [`christoffel_density`] as the
/// documented fallback.
pub fn build_density(
    ws: &WeightSystem,
    basis: &[MultiIndex],
    s_max: usize,
) -> Result<DensitySpec> {
    validate_basis(basis)?;
    if s_max < basis.len() {
        return Err(Error::invalid(format!(
            "tail cap {s_max} is smaller than the basis size {}",
            basis.len()
        )));
    }
    let prefix = sigma_ordered_prefix(ws, s_max, prefix_cap(s_max))?;
    let tail: Vec<(MultiIndex, f64)> = prefix
        .into_iter()
        .filter(|s| !basis.contains(s))
        .map(|s| {
            let inv = 1.0 / ws.sigma_sq(&s);
            (s, inv)
        })
        .collect();
    let tail_norm: f64 = tail.iter().map(|&(_, inv)| inv).sum();
    if !(tail_norm > 0.0) {
        return Err(Error::DegenerateDensity(format!(
            "tail normalizer {tail_norm} from {} tail indices; use the pure \
             Christoffel density instead",
            tail.len()
        )));
    }

    // neglected tail fraction, from the factorized total over the whole
    // family (itself an integral-bound estimate, infinite for eta <= 1)
    let total = ws.total_inverse_sigma_sq()?;
    let delta_tail = if total.is_finite() {
        let basis_mass: f64 = basis.iter().map(|s| 1.0 / ws.sigma_sq(s)).sum();
        let outside = total - basis_mass;
        if outside > 0.0 {
            ((outside - tail_norm) / outside).clamp(0.0, 1.0)
        } else {
            0.0
        }
    } else {
        1.0
    };

    let m = basis.len() as f64;
    let mut mass: Vec<f64> = basis.iter().map(|_| 0.5 / m).collect();
    mass.extend(tail.iter().map(|&(_, inv)| 0.5 * inv / tail_norm));

    let mut bytes = vec![1u8];
    bytes.extend_from_slice(&ws.fingerprint().to_le_bytes());
    bytes.extend_from_slice(&(s_max as u64).to_le_bytes());
    push_members(&mut bytes, basis);
    let fingerprint = fnv1a(&bytes);

    assemble(basis.to_vec(), tail, tail_norm, delta_tail, mass, fingerprint)
}

/// Builds the tail-free Christoffel density of `basis` alone: the equal
/// mixture `(1/m) sum_s |H_s|^2`. This is the fallback for specs whose tail
/// normalizer degenerates, and a valid density in its own right.
pub fn christoffel_density(basis: &[MultiIndex]) -> Result<DensitySpec> {
    validate_basis(basis)?;
    let m = basis.len() as f64;
    let mass: Vec<f64> = basis.iter().map(|_| 1.0 / m).collect();
    let mut bytes = vec![2u8];
    push_members(&mut bytes, basis);
    let fingerprint = fnv1a(&bytes);
    assemble(basis.to_vec(), Vec::new(), 0.0, 0.0, mass, fingerprint)
}

fn validate_basis(basis: &[MultiIndex]) -> Result<()> {
    if basis.is_empty() {
        return Err(Error::invalid("density needs at least one basis function"));
    }
    for (a, s) in basis.iter().enumerate() {
        if basis[..a].contains(s) {
            return Err(Error::invalid(format!(
                "basis member {s} appears twice; component masses would be \
                 distorted"
            )));
        }
    }
    Ok(())
}

fn push_members(bytes: &mut Vec<u8>, members: &[MultiIndex]) {
    for s in members {
        for (j, t) in s.iter() {
            bytes.extend_from_slice(&j.to_le_bytes());
            bytes.extend_from_slice(&t.to_le_bytes());
        }
        bytes.push(0xff);
    }
}

fn assemble(
    basis: Vec<MultiIndex>,
    tail: Vec<(MultiIndex, f64)>,
    tail_norm: f64,
    delta_tail: f64,
    mass: Vec<f64>,
    fingerprint: u64,
) -> Result<DensitySpec> {
    let mut cum_mass = Vec::with_capacity(mass.len());
    let mut acc = 0.0;
    for &w in &mass {
        acc += w;
        cum_mass.push(acc);
    }
    // the masses sum to 1 analytically; pin the float endpoint so component
    // selection from u in [0, 1) can never fall off the end
    *cum_mass.last_mut().expect("basis is non-empty") = 1.0;

    let mut coord_degrees: BTreeMap<u32, u32> = BTreeMap::new();
    for c in basis.iter().chain(tail.iter().map(|(s, _)| s)) {
        for (j, t) in c.iter() {
            let entry = coord_degrees.entry(j).or_insert(0);
            *entry = (*entry).max(t);
        }
    }
    let coord_degrees: Vec<(u32, u32)> = coord_degrees.into_iter().collect();
    let dim = coord_degrees.last().map_or(0, |&(j, _)| j as usize);

    let max_degree = coord_degrees.iter().map(|&(_, t)| t).max().unwrap_or(0);
    let radius = (2.0 * (max_degree as f64 + 40.0)).sqrt();
    let mut tables = BTreeMap::new();
    let mut mass_defect = 0.0f64;
    let mut degrees: Vec<u32> = basis
        .iter()
        .chain(tail.iter().map(|(s, _)| s))
        .flat_map(|s| s.iter().map(|(_, t)| t))
        .collect();
    degrees.sort_unstable();
    degrees.dedup();
    for t in degrees {
        let table = InvCdfTable::build(t, radius);
        mass_defect = mass_defect.max(table.defect);
        tables.insert(t, table);
    }

    Ok(DensitySpec {
        basis,
        tail,
        tail_norm,
        delta_tail,
        mass,
        cum_mass,
        coord_degrees,
        dim,
        tables,
        mass_defect,
        fingerprint,
    })
}

/// Tabulated CDF of one univariate component density `|H_t|^2 dgamma` on a
/// uniform grid over `[-R, R]`, with a monotone cubic through the table for
/// inversion.
#[derive(Debug, Clone)]
struct InvCdfTable {
    left: f64,
    step: f64,
    cdf: Vec<f64>,
    /// CDF derivative (the normalized density) at the nodes, clamped so the
    /// segment cubics stay monotone.
    deriv: Vec<f64>,
    defect: f64,
}

impl InvCdfTable {
    fn build(degree: u32, radius: f64) -> InvCdfTable {
        let n = TABLE_NODES;
        let left = -radius;
        let step = 2.0 * radius / (n - 1) as f64;
        let norm = 1.0 / (2.0 * std::f64::consts::PI).sqrt();
        let g = |y: f64| {
            let h = hermite_eval(degree, y);
            h * h * (-0.5 * y * y).exp() * norm
        };
        let mut cdf = vec![0.0; n];
        let mut deriv = vec![0.0; n];
        deriv[0] = g(left);
        for i in 1..n {
            let a = left + step * (i - 1) as f64;
            let mid = a + 0.5 * step;
            deriv[i] = g(a + step);
            cdf[i] = cdf[i - 1] + step / 6.0 * (deriv[i - 1] + 4.0 * g(mid) + deriv[i]);
        }
        let end = cdf[n - 1];
        let defect = (1.0 - end).abs();
        for v in cdf.iter_mut() {
            *v /= end;
        }
        for v in deriv.iter_mut() {
            *v /= end;
        }
        cdf[n - 1] = 1.0;
        // monotonicity clamp: a node derivative above three times an
        // adjacent secant slope lets the Hermite cubic overshoot
        for i in 0..n {
            let mut cap = f64::INFINITY;
            if i > 0 {
                cap = cap.min(3.0 * (cdf[i] - cdf[i - 1]) / step);
            }
            if i + 1 < n {
                cap = cap.min(3.0 * (cdf[i + 1] - cdf[i]) / step);
            }
            deriv[i] = deriv[i].min(cap).max(0.0);
        }
        InvCdfTable {
            left,
            step,
            cdf,
            deriv,
            defect,
        }
    }

    /// `F^{-1}(u)`: locate the grid segment by binary search, then solve the
    /// segment cubic by Newton steps safeguarded with bisection.
    fn invert(&self, u: f64) -> f64 {
        let n = self.cdf.len();
        if u <= 0.0 {
            return self.left;
        }
        if u >= 1.0 {
            return self.left + self.step * (n - 1) as f64;
        }
        let k = self.cdf.partition_point(|&c| c < u);
        let i = k - 1;
        let p0 = self.cdf[i];
        let d = self.cdf[k] - p0;
        if d <= 0.0 {
            return self.left + self.step * i as f64;
        }
        let m0 = self.deriv[i] * self.step;
        let m1 = self.deriv[k] * self.step;
        let c3 = m0 + m1 - 2.0 * d;
        let c2 = 3.0 * d - 2.0 * m0 - m1;
        let target = u - p0;
        let (mut lo, mut hi) = (0.0f64, 1.0f64);
        let mut t = (target / d).clamp(0.0, 1.0);
        for _ in 0..64 {
            let f = ((c3 * t + c2) * t + m0) * t - target;
            if f > 0.0 {
                hi = t;
            } else {
                lo = t;
            }
            let df = (3.0 * c3 * t + 2.0 * c2) * t + m0;
            let mut next = if df > 0.0 { t - f / df } else { f64::NAN };
            if !(next > lo && next < hi) {
                next = 0.5 * (lo + hi);
            }
            if (next - t).abs() < 1e-15 {
                t = next;
                break;
            }
            t = next;
        }
        self.left + self.step * (i as f64 + t)
    }
}
