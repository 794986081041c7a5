//! Budget planner for the level-stacked least-squares operator.
//!
//! Given a total sample budget `n`, the planner resolves the auxiliary
//! parameter `xi` from the bracketing condition for the active rate regime,
//! derives the level count `k_n = floor(log2 xi)`, splits the budget
//! geometrically (`n_k = floor(n 2^-k)`), and attaches to every level an
//! index set plus the sampling density built from it. Levels whose sample
//! share cannot support a single basis function are dropped and recorded.

use serde_json::json;

use crate::error::{Error, Result};
use crate::leastsq::{build_density, christoffel_density, DensitySpec};
use crate::multiindex::{
    enumerate_two_weight_set, fnv1a, reorder_by_weight, sigma_ordered_prefix, IndexSet,
    MultiIndex, SetKind, WeightSystem, DEFAULT_ENUMERATION_CAP,
};
use crate::sparsegrid::comp_weight;

/// Default oversampling factor in the per-level viability rule
/// `n_k >= ceil(c * m * ln(m + 1))`.
pub const DEFAULT_OVERSAMPLING: f64 = 2.0;

/// Default logarithm exponent `tau` when the rate regime leaves it free.
/// Any value above one is admissible; staying close to one keeps the
/// planned sets as large as the budget allows.
pub const DEFAULT_TAU: f64 = 1.001;

/// Sign of `alpha - 1/q2`, which selects both the bracketing condition for
/// `xi` and the per-level index-set family.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Regime {
    /// `alpha < 1/q2`: xi solves `xi <= n < 2 xi`, single-weight sets.
    Low,
    /// `alpha = 1/q2` within floating-point slack; planned like `Low` but
    /// tagged separately because the predicted rate gains a log factor.
    Equality,
    /// `alpha > 1/q2`: xi solves `xi^{q1 (alpha + delta)} <= n < 2 ...`,
    /// two-weight sets with the level-dependent second threshold.
    High,
}

impl Regime {
    pub fn tag(&self) -> &'static str {
        match self {
            Regime::Low => "alpha-below-1/q2",
            Regime::Equality => "alpha-at-1/q2",
            Regime::High => "alpha-above-1/q2",
        }
    }
}

/// Regime of the least-squares operator: the sign of `alpha - 1/q2`, with
/// a small slack band treated as equality.
pub fn lsq_regime(alpha: f64, q2: f64) -> Regime {
    let split = alpha - 1.0 / q2;
    if split.abs() <= 1e-12 {
        Regime::Equality
    } else if split < 0.0 {
        Regime::Low
    } else {
        Regime::High
    }
}

/// Everything the planner needs besides the budget itself.
pub struct PlanParams<'a> {
    pub alpha: f64,
    pub q1: f64,
    pub q2: f64,
    pub ws1: &'a WeightSystem,
    pub ws2: &'a WeightSystem,
    /// Log exponent override for the regimes that leave it free. The high
    /// regime derives `tau = alpha / (alpha - beta)` and rejects an override.
    pub tau: Option<f64>,
    pub oversampling: f64,
    pub set_cap: usize,
}

impl<'a> PlanParams<'a> {
    pub fn new(
        alpha: f64,
        q1: f64,
        q2: f64,
        ws1: &'a WeightSystem,
        ws2: &'a WeightSystem,
    ) -> Self {
        PlanParams {
            alpha,
            q1,
            q2,
            ws1,
            ws2,
            tau: None,
            oversampling: DEFAULT_OVERSAMPLING,
            set_cap: DEFAULT_ENUMERATION_CAP,
        }
    }

    fn check(&self) -> Result<()> {
        if !(self.q1 > 0.0 && self.q1 <= self.q2 && self.q2 < 2.0) {
            return Err(Error::invalid(format!(
                "need 0 < q1 <= q2 < 2, got q1={}, q2={}",
                self.q1, self.q2
            )));
        }
        if !(self.alpha > 0.0 && self.alpha.is_finite()) {
            return Err(Error::invalid("alpha must be positive and finite"));
        }
        if !(self.oversampling >= 1.0 && self.oversampling.is_finite()) {
            return Err(Error::invalid("oversampling factor must be at least 1"));
        }
        Ok(())
    }
}

/// One planned level: its budget share, index set and sampling density.
pub struct LevelSpec {
    pub k: u32,
    pub n_k: usize,
    pub set: IndexSet,
    pub density: DensitySpec,
    /// True when the candidate set had to be truncated to its cheapest
    /// members (by second weight) to satisfy the viability rule.
    pub shrunk: bool,
}

impl LevelSpec {
    pub fn m_k(&self) -> usize {
        self.set.len()
    }
}

/// A resolved sampling plan for one total budget.
pub struct LevelPlan {
    budget: u64,
    n_eff: u64,
    xi: f64,
    k_n: u32,
    regime: Regime,
    alpha: f64,
    tau: f64,
    beta: f64,
    oversampling: f64,
    bar: bool,
    levels: Vec<LevelSpec>,
    dropped: Vec<(u32, String)>,
}

impl LevelPlan {
    /// The caller-facing budget `n`. For the bar variant this is the bound
    /// the weighted cost must respect, not the per-level split base.
    pub fn budget(&self) -> u64 {
        self.budget
    }

    /// The budget actually split across levels; `ceil(n / log2 n)` for the
    /// bar variant, `n` otherwise.
    pub fn n_eff(&self) -> u64 {
        self.n_eff
    }

    pub fn xi(&self) -> f64 {
        self.xi
    }

    pub fn k_n(&self) -> u32 {
        self.k_n
    }

    pub fn regime(&self) -> Regime {
        self.regime
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    /// The smoothness-limited exponent `(1/q1) alpha / (alpha + delta)`.
    pub fn beta(&self) -> f64 {
        self.beta
    }

    /// Exponent of the algebraic factor in the predicted error decay.
    pub fn predicted_rate(&self) -> f64 {
        match self.regime {
            Regime::Low | Regime::Equality => self.alpha,
            Regime::High => self.beta,
        }
    }

    pub fn oversampling(&self) -> f64 {
        self.oversampling
    }

    pub fn is_bar(&self) -> bool {
        self.bar
    }

    pub fn levels(&self) -> &[LevelSpec] {
        &self.levels
    }

    /// Levels removed during planning, with the reason.
    pub fn dropped(&self) -> &[(u32, String)] {
        &self.dropped
    }

    /// Weighted cost of the plan under the dyadic solve model,
    /// `sum_k comp_weight(k) n_k` over the retained levels.
    pub fn planned_comp(&self) -> u64 {
        self.levels
            .iter()
            .map(|l| comp_weight(l.k) * l.n_k as u64)
            .sum()
    }

    pub fn to_json(&self) -> serde_json::Value {
        json!({
            "n": self.budget,
            "n_eff": self.n_eff,
            "xi_n": self.xi,
            "k_n": self.k_n,
            "regime": self.regime.tag(),
            "tau": self.tau,
            "comp": self.planned_comp(),
            "levels": self
                .levels
                .iter()
                .map(|l| {
                    json!({
                        "k": l.k,
                        "n_k": l.n_k,
                        "m_k": l.m_k(),
                        "lambda_hash": format!("{:016x}", member_hash(l.set.members())),
                        "shrunk": l.shrunk,
                    })
                })
                .collect::<Vec<_>>(),
            "dropped": self
                .dropped
                .iter()
                .map(|(k, why)| json!({ "k": k, "reason": why }))
                .collect::<Vec<_>>(),
        })
    }
}

/// Hash of an index-set member list, stable across runs: FNV-1a over the
/// `(coordinate, order)` pairs with a separator byte per member.
pub(crate) fn member_hash(members: &[MultiIndex]) -> u64 {
    let mut bytes = Vec::new();
    for s in members {
        for (j, t) in s.iter() {
            bytes.extend_from_slice(&j.to_le_bytes());
            bytes.extend_from_slice(&t.to_le_bytes());
        }
        bytes.push(0xff);
    }
    fnv1a(&bytes)
}

/// Plans the direct operator: the full budget `n` is split across levels.
pub fn plan(n: u64, params: &PlanParams) -> Result<LevelPlan> {
    build_plan(n, n, false, params)
}

/// Plans the normalized variant whose weighted cost stays below `n`: the
/// per-level split uses `ceil(n / log2 n)` while `n` itself is recorded as
/// the cost budget the recovery must respect.
pub fn plan_bar(n: u64, params: &PlanParams) -> Result<LevelPlan> {
    if n < 2 {
        return Err(Error::invalid("bar plan needs a budget of at least 2"));
    }
    let n_eff = ((n as f64) / (n as f64).log2()).ceil() as u64;
    build_plan(n, n_eff.max(2), true, params)
}

/// Degenerate plan with a single level `k` taking the whole budget: the
/// single-level operator recovering the level-`k` solution itself rather
/// than a detail. The set is the sigma-ordered prefix of the largest size
/// the budget supports under the oversampling rule.
pub fn single_level(n: u64, k: u32, params: &PlanParams) -> Result<LevelPlan> {
    if n < 2 {
        return Err(Error::invalid("single-level plan needs a budget of at least 2"));
    }
    params.check()?;
    let delta = 1.0 / params.q1 - 1.0 / params.q2;
    let regime = lsq_regime(params.alpha, params.q2);
    let beta = (1.0 / params.q1) * params.alpha / (params.alpha + delta);
    let n_k = n as usize;
    let m_max = largest_viable_m(n_k, params.oversampling);
    if m_max == 0 {
        return Err(Error::invalid(format!(
            "budget {n} cannot support one basis function at oversampling {}",
            params.oversampling
        )));
    }
    let members = sigma_ordered_prefix(params.ws2, m_max, params.set_cap)?;
    if members.is_empty() {
        return Err(Error::invalid("weight system yields no members"));
    }
    let threshold = params.ws2.sigma(members.last().expect("non-empty"))?;
    let set = IndexSet::from_members(
        members,
        threshold,
        SetKind::SingleWeight { q: params.q2 },
        params.ws2.fingerprint(),
    );
    let s_max = set.len() + set.len().max(16);
    let density = match build_density(params.ws2, set.members(), s_max) {
        Ok(d) => d,
        Err(Error::DegenerateDensity(_)) => christoffel_density(set.members())?,
        Err(e) => return Err(e),
    };
    let levels = vec![LevelSpec {
        k,
        n_k,
        set,
        density,
        shrunk: false,
    }];
    Ok(LevelPlan {
        budget: n,
        n_eff: n,
        xi: threshold,
        k_n: k,
        regime,
        alpha: params.alpha,
        tau: params.tau.unwrap_or(DEFAULT_TAU),
        beta,
        oversampling: params.oversampling,
        bar: false,
        levels,
        dropped: Vec::new(),
    })
}

fn build_plan(budget: u64, n_eff: u64, bar: bool, params: &PlanParams) -> Result<LevelPlan> {
    if budget < 2 || n_eff < 2 {
        return Err(Error::invalid("plan needs a budget of at least 2"));
    }
    params.check()?;
    let (alpha, q1, q2) = (params.alpha, params.q1, params.q2);

    let delta = 1.0 / q1 - 1.0 / q2;
    let beta = (1.0 / q1) * alpha / (alpha + delta);
    let regime = lsq_regime(alpha, q2);

    let tau = match regime {
        Regime::Low | Regime::Equality => {
            let t = params.tau.unwrap_or(DEFAULT_TAU);
            if !(t > 1.0 && t.is_finite()) {
                return Err(Error::invalid("tau must exceed 1"));
            }
            t
        }
        Regime::High => {
            if params.tau.is_some() {
                return Err(Error::invalid(
                    "tau is determined by alpha/(alpha - beta) when alpha > 1/q2",
                ));
            }
            // alpha > 1/q2 makes beta < alpha, so the ratio is positive
            alpha / (alpha - beta)
        }
    };

    // The bracketing condition: xi is the largest value with g(xi) <= n_eff,
    // where g is the identity below/at the regime split and
    // xi^{q1 (alpha + delta)} above it. Both are continuous and strictly
    // increasing, so bisection from a doubled upper bound converges and the
    // returned lower endpoint never violates g(xi) <= n_eff.
    let g = |xi: f64| -> f64 {
        match regime {
            Regime::Low | Regime::Equality => xi,
            Regime::High => xi.powf(q1 * (alpha + delta)),
        }
    };
    let target = n_eff as f64;
    let mut lo = 1.0_f64;
    let mut hi = 2.0_f64;
    while g(hi) <= target {
        hi *= 2.0;
        if hi > 1e300 {
            return Err(Error::Range("xi bracket escaped the float range".into()));
        }
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if g(mid) <= target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let xi = lo;
    if !(g(xi) <= target && target < 2.0 * g(xi)) {
        return Err(Error::Solver("xi bisection lost its bracket".into()));
    }
    let k_n = xi.log2().floor().max(0.0) as u32;

    let mut levels = Vec::new();
    let mut dropped = Vec::new();
    for k in 0..=k_n {
        let n_k = (n_eff >> k) as usize;
        if n_k == 0 {
            dropped.push((k, "no sample budget".to_string()));
            continue;
        }
        let m_max = largest_viable_m(n_k, params.oversampling);
        if m_max == 0 {
            dropped.push((k, "budget cannot support one basis function".to_string()));
            continue;
        }

        let (members, threshold, kind, shrunk) = match regime {
            Regime::Low | Regime::Equality => {
                let members = sigma_ordered_prefix(params.ws2, m_max, params.set_cap)?;
                if members.is_empty() {
                    dropped.push((k, "weight system yields no members".to_string()));
                    continue;
                }
                let t = params.ws2.sigma(members.last().unwrap())?;
                (members, t, SetKind::SingleWeight { q: q2 }, false)
            }
            Regime::High => {
                let set = enumerate_two_weight_set(
                    params.ws1,
                    params.ws2,
                    q1,
                    xi,
                    k,
                    alpha,
                    tau,
                    params.set_cap,
                )?;
                if set.is_empty() {
                    dropped.push((k, "second threshold fell below one".to_string()));
                    continue;
                }
                if set.len() > m_max {
                    let ordered = reorder_by_weight(params.ws2, &set);
                    let members: Vec<MultiIndex> =
                        ordered.into_iter().take(m_max).collect();
                    (members, set.threshold(), set.kind().clone(), true)
                } else {
                    let members = set.members().to_vec();
                    (members, set.threshold(), set.kind().clone(), false)
                }
            }
        };

        let set = IndexSet::from_members(members, threshold, kind, params.ws2.fingerprint());
        let m_k = set.len();
        let s_max = m_k + m_k.max(16);
        let density = match build_density(params.ws2, set.members(), s_max) {
            Ok(d) => d,
            Err(Error::DegenerateDensity(_)) => christoffel_density(set.members())?,
            Err(e) => return Err(e),
        };
        levels.push(LevelSpec {
            k,
            n_k,
            set,
            density,
            shrunk,
        });
    }

    Ok(LevelPlan {
        budget,
        n_eff,
        xi,
        k_n,
        regime,
        alpha,
        tau,
        beta,
        oversampling: params.oversampling,
        bar,
        levels,
        dropped,
    })
}

/// Largest basis size `m` whose viability requirement
/// `ceil(c m ln(m + 1)) <= n_k` holds. Also used by the recovery step when
/// a budget cut forces a level to shrink.
pub(crate) fn largest_viable_m(n_k: usize, oversampling: f64) -> usize {
    let mut m = 0usize;
    while min_samples_for(m + 1, oversampling) <= n_k {
        m += 1;
    }
    m
}

/// Sample count the viability rule demands for a basis of size `m`.
pub(crate) fn min_samples_for(m: usize, oversampling: f64) -> usize {
    if m == 0 {
        return 0;
    }
    (oversampling * m as f64 * ((m + 1) as f64).ln()).ceil() as usize
}
