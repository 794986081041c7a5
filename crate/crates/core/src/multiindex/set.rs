//! Threshold index sets and their enumeration.
//!
//! All sets here are of the form `{ s : sigma_s <= T }` for one or two weight
//! systems. Because `sigma` is strictly increasing under componentwise
//! increment (for `eta >= 1`), such sets are finite, downward closed, and
//! enumerable by a depth-first search over coordinates that prunes as soon as
//! the partial product of per-coordinate factors exceeds the threshold.
//!
//! Enumeration compares `sigma^2 <= T^2` in linear arithmetic (overflow
//! saturates to infinity and prunes), switching to log-space comparisons only
//! when `T^2` itself is not representable.

use super::weight::{fnv1a, WeightSystem};
use super::MultiIndex;
use crate::error::{Error, Result};
use std::fmt::Write as _;

/// Default cap on the number of members a single enumeration may produce.
pub const DEFAULT_ENUMERATION_CAP: usize = 200_000;

/// Hard cap on the active-coordinate scan.
const MAX_ACTIVE_COORDINATE: u32 = 10_000_000;

/// Which rate regime a per-level interpolation set was built for.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LevelRegime {
    /// `alpha <= 1/q2 - 1/2`: single constraint on the second weight system.
    SmallAlpha,
    /// `alpha > 1/q2 - 1/2`: joint constraint on both weight systems.
    LargeAlpha,
}

impl LevelRegime {
    fn tag(&self) -> &'static str {
        match self {
            LevelRegime::SmallAlpha => "small-alpha",
            LevelRegime::LargeAlpha => "large-alpha",
        }
    }
}

/// How an index set was defined.
#[derive(Debug, Clone, PartialEq)]
pub enum SetKind {
    /// `{ s : sigma_s <= T }`.
    SingleWeight { q: f64 },
    /// `{ s : sigma_{2,s} <= xi^{1/q1} 2^{-alpha m} m^tau, sigma_{1,s} <= xi^{1/q1} }`
    /// with `m^tau := 1` at `m = 0`.
    TwoWeight {
        q1: f64,
        xi: f64,
        m: u32,
        alpha: f64,
        tau: f64,
    },
    /// Level-`k` set of the multi-level interpolation operator.
    Level { k: u32, regime: LevelRegime, xi: f64 },
}

/// A finite downward-closed set of multi-indices with its defining threshold.
#[derive(Debug, Clone, PartialEq)]
pub struct IndexSet {
    members: Vec<MultiIndex>, // sorted in dense-lexicographic order
    threshold: f64,           // threshold on the binding sigma
    kind: SetKind,
    ws_hash: u64,
}

impl IndexSet {
    pub fn members(&self) -> &[MultiIndex] {
        &self.members
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn threshold(&self) -> f64 {
        self.threshold
    }

    pub fn kind(&self) -> &SetKind {
        &self.kind
    }

    pub fn ws_hash(&self) -> u64 {
        self.ws_hash
    }

    pub fn contains(&self, s: &MultiIndex) -> bool {
        self.members.binary_search_by(|m| m.lex_cmp(s)).is_ok()
    }

    /// Largest coordinate appearing in any member.
    pub fn max_coordinate(&self) -> u32 {
        self.members
            .iter()
            .map(|s| s.max_coordinate())
            .max()
            .unwrap_or(0)
    }

    /// Largest order appearing in any single coordinate.
    pub fn max_order(&self) -> u32 {
        self.members.iter().map(|s| s.max_order()).max().unwrap_or(0)
    }

    /// Every member with any coordinate decremented stays in the set.
    pub fn is_downward_closed(&self) -> bool {
        self.members.iter().all(|s| {
            s.support().all(|j| {
                let t = s.decremented(j).expect("support coordinate");
                self.contains(&t)
            })
        })
    }

    /// Builds a set directly from members (used by planners for shrunken
    /// prefixes and by the text reader). Members are sorted and deduplicated.
    pub fn from_members(
        mut members: Vec<MultiIndex>,
        threshold: f64,
        kind: SetKind,
        ws_hash: u64,
    ) -> Self {
        members.sort_by(|a, b| a.lex_cmp(b));
        members.dedup();
        IndexSet {
            members,
            threshold,
            kind,
            ws_hash,
        }
    }

    /// One line per member: `j1:s1 j2:s2 … # sigma=<value>` (the zero index
    /// prints as `-`), preceded by a header recording the definition.
    pub fn to_text(&self, sigma_of: impl Fn(&MultiIndex) -> f64) -> String {
        let mut out = String::new();
        match &self.kind {
            SetKind::SingleWeight { q } => {
                writeln!(
                    out,
                    "# indexset kind=single q={q:?} T={:?} ws={:016x} n={}",
                    self.threshold,
                    self.ws_hash,
                    self.members.len()
                )
                .unwrap();
            }
            SetKind::TwoWeight {
                q1,
                xi,
                m,
                alpha,
                tau,
            } => {
                writeln!(
                    out,
                    "# indexset kind=two-weight q1={q1:?} xi={xi:?} m={m} alpha={alpha:?} tau={tau:?} T={:?} ws={:016x} n={}",
                    self.threshold,
                    self.ws_hash,
                    self.members.len()
                )
                .unwrap();
            }
            SetKind::Level { k, regime, xi } => {
                writeln!(
                    out,
                    "# indexset kind=level k={k} regime={} xi={xi:?} T={:?} ws={:016x} n={}",
                    regime.tag(),
                    self.threshold,
                    self.ws_hash,
                    self.members.len()
                )
                .unwrap();
            }
        }
        for s in &self.members {
            writeln!(out, "{s} # sigma={:?}", sigma_of(s)).unwrap();
        }
        out
    }

    /// Parses the text form produced by [`IndexSet::to_text`]. Returns the
    /// set and the recorded sigma annotations in member order.
    pub fn from_text(text: &str) -> Result<(IndexSet, Vec<f64>)> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let header = lines
            .next()
            .ok_or_else(|| Error::invalid("empty index-set text"))?;
        let header = header
            .strip_prefix("# indexset ")
            .ok_or_else(|| Error::invalid("missing index-set header"))?;
        let mut fields = std::collections::HashMap::new();
        for tok in header.split_whitespace() {
            let (k, v) = tok
                .split_once('=')
                .ok_or_else(|| Error::invalid(format!("bad header token {tok}")))?;
            fields.insert(k.to_string(), v.to_string());
        }
        let get = |k: &str| -> Result<&String> {
            fields
                .get(k)
                .ok_or_else(|| Error::invalid(format!("header missing {k}")))
        };
        let parse_f = |v: &str| -> Result<f64> {
            v.parse::<f64>()
                .map_err(|_| Error::invalid(format!("bad float {v}")))
        };
        let kind = match get("kind")?.as_str() {
            "single" => SetKind::SingleWeight {
                q: parse_f(get("q")?)?,
            },
            "two-weight" => SetKind::TwoWeight {
                q1: parse_f(get("q1")?)?,
                xi: parse_f(get("xi")?)?,
                m: get("m")?
                    .parse()
                    .map_err(|_| Error::invalid("bad m in header"))?,
                alpha: parse_f(get("alpha")?)?,
                tau: parse_f(get("tau")?)?,
            },
            "level" => SetKind::Level {
                k: get("k")?
                    .parse()
                    .map_err(|_| Error::invalid("bad k in header"))?,
                regime: match get("regime")?.as_str() {
                    "small-alpha" => LevelRegime::SmallAlpha,
                    "large-alpha" => LevelRegime::LargeAlpha,
                    other => return Err(Error::invalid(format!("bad regime {other}"))),
                },
                xi: parse_f(get("xi")?)?,
            },
            other => return Err(Error::invalid(format!("unknown set kind {other}"))),
        };
        let threshold = parse_f(get("T")?)?;
        let ws_hash = u64::from_str_radix(get("ws")?, 16)
            .map_err(|_| Error::invalid("bad ws hash in header"))?;
        let mut members = Vec::new();
        let mut sigmas = Vec::new();
        for line in lines {
            let (idx_part, sigma_part) = line
                .split_once('#')
                .ok_or_else(|| Error::invalid(format!("member line missing sigma: {line}")))?;
            let sigma_part = sigma_part.trim();
            let sigma_val = sigma_part
                .strip_prefix("sigma=")
                .ok_or_else(|| Error::invalid("missing sigma annotation"))?;
            sigmas.push(parse_f(sigma_val)?);
            let idx_part = idx_part.trim();
            if idx_part == "-" {
                members.push(MultiIndex::zero());
                continue;
            }
            let mut pairs = Vec::new();
            for tok in idx_part.split_whitespace() {
                let (j, s) = tok
                    .split_once(':')
                    .ok_or_else(|| Error::invalid(format!("bad entry {tok}")))?;
                pairs.push((
                    j.parse()
                        .map_err(|_| Error::invalid(format!("bad coordinate {j}")))?,
                    s.parse()
                        .map_err(|_| Error::invalid(format!("bad order {s}")))?,
                ));
            }
            members.push(MultiIndex::from_pairs(pairs)?);
        }
        // keep parsed sigmas aligned with members through the canonical sort
        let mut paired: Vec<(MultiIndex, f64)> =
            members.into_iter().zip(sigmas.into_iter()).collect();
        paired.sort_by(|a, b| a.0.lex_cmp(&b.0));
        let (members, sigmas): (Vec<_>, Vec<_>) = paired.into_iter().unzip();
        Ok((
            IndexSet {
                members,
                threshold,
                kind,
                ws_hash,
            },
            sigmas,
        ))
    }
}

/// One `sigma <= T` constraint prepared for enumeration.
struct Constraint<'a> {
    ws: &'a WeightSystem,
    t_sq: f64,
    ln_t_sq: f64,
    log_mode: bool,
}

impl<'a> Constraint<'a> {
    fn new(ws: &'a WeightSystem, t: f64) -> Result<Self> {
        if !(t > 0.0 && t.is_finite()) {
            return Err(Error::invalid(format!(
                "threshold must be positive and finite, got {t}"
            )));
        }
        let t_sq = t * t;
        Ok(Constraint {
            ws,
            t_sq,
            ln_t_sq: 2.0 * t.ln(),
            log_mode: !t_sq.is_finite(),
        })
    }

    /// Partial weight of coordinate `j` at order `t` (linear or log scale).
    fn factor(&self, j: u32, t: u32) -> f64 {
        if self.log_mode {
            self.ws.log_coordinate_factor(j, t)
        } else {
            self.ws.coordinate_factor(j, t)
        }
    }

    fn identity(&self) -> f64 {
        if self.log_mode {
            0.0
        } else {
            1.0
        }
    }

    fn combine(&self, acc: f64, factor: f64) -> f64 {
        if self.log_mode {
            acc + factor
        } else {
            acc * factor
        }
    }

    fn exceeds(&self, acc: f64) -> bool {
        if self.log_mode {
            acc > self.ln_t_sq
        } else {
            !(acc <= self.t_sq)
        }
    }
}

/// Enumerates `{ s : sigma_{c,s} <= T_c for every constraint c }`.
fn enumerate_constrained(constraints: &[Constraint<'_>], cap: usize) -> Result<Vec<MultiIndex>> {
    assert!(!constraints.is_empty());
    if constraints.iter().all(|c| c.ws.eta() == 0) {
        // every sigma is identically 1: the set is empty or infinite
        if constraints.iter().any(|c| c.exceeds(c.identity())) {
            return Ok(Vec::new());
        }
        return Err(Error::BudgetExceeded(
            "all weight systems have eta = 0, so the threshold set is infinite".to_string(),
        ));
    }

    let root: Vec<f64> = constraints.iter().map(|c| c.identity()).collect();
    // the zero index itself must pass (it fails only when some T < 1)
    if constraints
        .iter()
        .enumerate()
        .any(|(i, c)| c.exceeds(root[i]))
    {
        return Ok(Vec::new());
    }
    let mut out = Vec::new();
    let mut stack: Vec<(u32, u32)> = Vec::new();
    dfs(constraints, 1, &root, &mut stack, &mut out, cap)?;
    out.sort_by(|a, b| a.lex_cmp(b));
    Ok(out)
}

/// Records the index on the stack, then extends it with every feasible
/// `(coordinate, order)` pair whose coordinate is at least `jstart`.
/// Recursion depth is bounded by the support size: each recursion step
/// multiplies the accumulated weight by a factor greater than one.
///
/// Because `rho_j` is non-decreasing in `j`, a coordinate whose order-1
/// factor already violates some constraint ends the coordinate loop: all
/// deeper coordinates violate it as well.
fn dfs(
    constraints: &[Constraint<'_>],
    jstart: u32,
    acc: &[f64],
    stack: &mut Vec<(u32, u32)>,
    out: &mut Vec<MultiIndex>,
    cap: usize,
) -> Result<()> {
    if out.len() >= cap {
        return Err(Error::BudgetExceeded(format!(
            "enumeration exceeded the cap of {cap} members"
        )));
    }
    out.push(MultiIndex::from_pairs(stack.iter().copied()).expect("stack entries are canonical"));

    let mut j = jstart;
    loop {
        if j > MAX_ACTIVE_COORDINATE {
            return Err(Error::BudgetExceeded(
                "active-coordinate scan exceeded its cap".to_string(),
            ));
        }
        let mut t = 1u32;
        loop {
            let mut next = Vec::with_capacity(acc.len());
            let mut pruned = false;
            for (i, c) in constraints.iter().enumerate() {
                let v = c.combine(acc[i], c.factor(j, t));
                if c.exceeds(v) {
                    pruned = true;
                    break;
                }
                next.push(v);
            }
            if pruned {
                if t == 1 {
                    // infeasible at order 1: every deeper coordinate is too
                    return Ok(());
                }
                break;
            }
            stack.push((j, t));
            dfs(constraints, j + 1, &next, stack, out, cap)?;
            stack.pop();
            t += 1;
        }
        j += 1;
    }
}

fn combined_hash(systems: &[&WeightSystem]) -> u64 {
    let mut bytes = Vec::with_capacity(8 * systems.len());
    for ws in systems {
        bytes.extend_from_slice(&ws.fingerprint().to_le_bytes());
    }
    fnv1a(&bytes)
}

/// `{ s : sigma_s <= t }` for a single weight system. `q` is recorded for
/// provenance (callers typically pass `t = xi^{1/q}`).
pub fn enumerate_threshold_set(
    ws: &WeightSystem,
    q: f64,
    t: f64,
    cap: usize,
) -> Result<IndexSet> {
    let members = enumerate_constrained(&[Constraint::new(ws, t)?], cap)?;
    Ok(IndexSet {
        members,
        threshold: t,
        kind: SetKind::SingleWeight { q },
        ws_hash: combined_hash(&[ws]),
    })
}

/// Two-weight set
/// `{ s : sigma_{1,s} <= xi^{1/q1}, sigma_{2,s} <= xi^{1/q1} 2^{-alpha m} m^tau }`
/// with the convention `m^tau := 1` at `m = 0`.
pub fn enumerate_two_weight_set(
    ws1: &WeightSystem,
    ws2: &WeightSystem,
    q1: f64,
    xi: f64,
    m: u32,
    alpha: f64,
    tau: f64,
    cap: usize,
) -> Result<IndexSet> {
    if !(xi > 0.0) {
        return Err(Error::invalid("xi must be positive"));
    }
    let t1 = xi.powf(1.0 / q1);
    let m_pow = if m == 0 { 1.0 } else { (m as f64).powf(tau) };
    let t2 = t1 * (-alpha * m as f64).exp2() * m_pow;
    let members = enumerate_constrained(
        &[Constraint::new(ws1, t1)?, Constraint::new(ws2, t2)?],
        cap,
    )?;
    Ok(IndexSet {
        members,
        threshold: t2,
        kind: SetKind::TwoWeight {
            q1,
            xi,
            m,
            alpha,
            tau,
        },
        ws_hash: combined_hash(&[ws1, ws2]),
    })
}

/// Level-`k` index set of the multi-level interpolation operator:
///
/// * `alpha <= 1/q2 - 1/2`: `{ s : sigma_{2,s} <= 2^{-k/q2} xi^{1/q2} }`;
/// * otherwise, with `eta_e = 2 alpha / (2 - q2)` and
///   `theta_e = (2/(2-q2)) (1/q1 - 1/2)`:
///   `{ s : sigma_{1,s} <= xi^{1/q1}, sigma_{2,s} <= 2^{-eta_e k} xi^{theta_e} }`.
pub fn enumerate_level_set(
    ws1: &WeightSystem,
    ws2: &WeightSystem,
    q1: f64,
    q2: f64,
    alpha: f64,
    xi: f64,
    k: u32,
    cap: usize,
) -> Result<IndexSet> {
    if !(q1 > 0.0 && q2 >= q1 && q2 < 2.0) {
        return Err(Error::invalid(format!(
            "need 0 < q1 <= q2 < 2, got q1={q1}, q2={q2}"
        )));
    }
    if !(xi >= 1.0 && xi.is_finite()) {
        return Err(Error::invalid("xi must be >= 1"));
    }
    if alpha <= 1.0 / q2 - 0.5 {
        let t = (-(k as f64) / q2).exp2() * xi.powf(1.0 / q2);
        let members = enumerate_constrained(&[Constraint::new(ws2, t)?], cap)?;
        Ok(IndexSet {
            members,
            threshold: t,
            kind: SetKind::Level {
                k,
                regime: LevelRegime::SmallAlpha,
                xi,
            },
            ws_hash: combined_hash(&[ws2]),
        })
    } else {
        let eta_e = 2.0 * alpha / (2.0 - q2);
        let theta_e = (2.0 / (2.0 - q2)) * (1.0 / q1 - 0.5);
        let t1 = xi.powf(1.0 / q1);
        let t2 = (-eta_e * k as f64).exp2() * xi.powf(theta_e);
        let members = enumerate_constrained(
            &[Constraint::new(ws1, t1)?, Constraint::new(ws2, t2)?],
            cap,
        )?;
        Ok(IndexSet {
            members,
            threshold: t2,
            kind: SetKind::Level {
                k,
                regime: LevelRegime::LargeAlpha,
                xi,
            },
            ws_hash: combined_hash(&[ws1, ws2]),
        })
    }
}

/// The first `count` multi-indices in `(sigma, lexicographic)` order. Grows a
/// threshold set geometrically until it holds at least `count` members.
pub fn sigma_ordered_prefix(
    ws: &WeightSystem,
    count: usize,
    cap: usize,
) -> Result<Vec<MultiIndex>> {
    if count == 0 {
        return Ok(Vec::new());
    }
    let mut t = (ws.sigma(&MultiIndex::unit(1))? * 1.5).max(2.0);
    loop {
        match enumerate_threshold_set(ws, ws.q(), t, cap) {
            Ok(set) if set.len() >= count => {
                let mut members: Vec<(f64, MultiIndex)> = set
                    .members
                    .into_iter()
                    .map(|s| (ws.log_sigma_sq(&s), s))
                    .collect();
                members.sort_by(|a, b| {
                    a.0.partial_cmp(&b.0)
                        .expect("log sigma is finite")
                        .then_with(|| a.1.lex_cmp(&b.1))
                });
                return Ok(members.into_iter().take(count).map(|(_, s)| s).collect());
            }
            Ok(_) => {
                t *= 4.0;
                if !t.is_finite() {
                    return Err(Error::Range(
                        "sigma-ordered prefix threshold overflowed".to_string(),
                    ));
                }
            }
            Err(e) => return Err(e),
        }
    }
}

/// Sorts the members of a set by `(sigma, lexicographic)`.
pub fn reorder_by_weight(ws: &WeightSystem, set: &IndexSet) -> Vec<MultiIndex> {
    let mut members: Vec<(f64, MultiIndex)> = set
        .members()
        .iter()
        .map(|s| (ws.log_sigma_sq(s), s.clone()))
        .collect();
    members.sort_by(|a, b| {
        a.0.partial_cmp(&b.0)
            .expect("log sigma is finite")
            .then_with(|| a.1.lex_cmp(&b.1))
    });
    members.into_iter().map(|(_, s)| s).collect()
}
