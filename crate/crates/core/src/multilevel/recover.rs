//! Recovery drivers: the randomized least-squares operator and the
//! deterministic interpolation operator, both stacked over the dyadic
//! spatial hierarchy, plus the exact cost accounting for their runs.

use nalgebra::DMatrix;
use serde_json::json;

use super::plan::{min_samples_for, LevelPlan, LevelSpec};
use crate::error::{Error, Result};
use crate::leastsq::{draw_batch, lsq_fit, LsqFit};
use crate::multiindex::{
    enumerate_level_set, IndexSet, MultiIndex, WeightSystem, DEFAULT_ENUMERATION_CAP,
};
use crate::sparsegrid::{
    comp_weight, level_count, multilevel_interpolate, DeltaSource, SparseInterpolant,
};
use crate::spatial::SpatialHierarchy;

/// What a recovered level holds.
pub enum LevelKind {
    /// The level was planned but contributes nothing (trivial detail space
    /// or a budget cut); it evaluates to zero.
    Empty,
    /// Least-squares fit of the merged nodal frame, one column per entry.
    Lsq(Box<LsqFit>),
    /// Sparse-grid interpolant of the merged nodal frame.
    Interp(Box<SparseInterpolant<Vec<f64>>>),
}

/// One level of a finished recovery run.
pub struct RecoveredLevel {
    pub k: u32,
    /// Parametric points this level consumed: sample draws for the
    /// least-squares driver, raw grid evaluations for interpolation.
    pub points: u64,
    /// Point evaluations of scalar spatial data, `merged_dim(k) * points`.
    pub sample_pairs: u64,
    /// Same with deduplicated parametric points.
    pub distinct_pairs: u64,
    /// Index set the level was built on (the planned set for empty levels).
    pub set: Option<IndexSet>,
    /// The least-squares fit was rebuilt once from a fresh draw.
    pub retried: bool,
    /// Still rank-deficient after the retry.
    pub flagged: bool,
    pub kind: LevelKind,
}

impl RecoveredLevel {
    fn empty(k: u32, set: Option<IndexSet>) -> Self {
        RecoveredLevel {
            k,
            points: 0,
            sample_pairs: 0,
            distinct_pairs: 0,
            set,
            retried: false,
            flagged: false,
            kind: LevelKind::Empty,
        }
    }
}

/// A level sum `sum_k (approximation of delta_k v)` ready for evaluation,
/// together with everything the cost ledger needs.
pub struct RecoveryResult {
    hier: SpatialHierarchy,
    levels: Vec<RecoveredLevel>,
    variant: &'static str,
    /// Contract bound on `sample_pairs` when the run promised one.
    budget: Option<u64>,
    seed: Option<u64>,
    /// Budget cuts applied at recovery time: `(k, planned n_k, actual n_k)`.
    adjusted: Vec<(u32, usize, usize)>,
}

impl RecoveryResult {
    pub fn levels(&self) -> &[RecoveredLevel] {
        &self.levels
    }

    pub fn variant(&self) -> &'static str {
        self.variant
    }

    pub fn budget(&self) -> Option<u64> {
        self.budget
    }

    pub fn seed(&self) -> Option<u64> {
        self.seed
    }

    pub fn adjusted(&self) -> &[(u32, usize, usize)] {
        &self.adjusted
    }

    pub fn hierarchy(&self) -> &SpatialHierarchy {
        &self.hier
    }

    /// Total parametric points over all levels.
    pub fn total_points(&self) -> u64 {
        self.levels.iter().map(|l| l.points).sum()
    }

    /// Total scalar point evaluations over all levels.
    pub fn sample_pairs(&self) -> u64 {
        self.levels.iter().map(|l| l.sample_pairs).sum()
    }

    pub fn distinct_pairs(&self) -> u64 {
        self.levels.iter().map(|l| l.distinct_pairs).sum()
    }

    /// Weighted solve cost `sum_k comp_weight(k) * points_k` recomputed
    /// from the recorded levels.
    pub fn comp(&self) -> u64 {
        self.levels
            .iter()
            .map(|l| comp_weight(l.k) * l.points)
            .sum()
    }

    pub fn flagged_levels(&self) -> Vec<u32> {
        self.levels
            .iter()
            .filter(|l| l.flagged)
            .map(|l| l.k)
            .collect()
    }

    /// Merged-frame coefficients of level `lvl` at `y`, written into `buf`.
    /// Empty levels leave `buf` empty.
    fn merged_at(&self, lvl: &RecoveredLevel, y: &[f64], buf: &mut Vec<f64>) {
        buf.clear();
        match &lvl.kind {
            LevelKind::Empty => {}
            LevelKind::Lsq(fit) => fit.eval(y, buf),
            LevelKind::Interp(ip) => *buf = ip.eval(y),
        }
    }

    /// Point value of the recovered two-variable function.
    pub fn eval(&self, x: f64, y: &[f64]) -> Result<f64> {
        let mut acc = 0.0;
        let mut buf = Vec::new();
        for lvl in &self.levels {
            self.merged_at(lvl, y, &mut buf);
            if buf.is_empty() {
                continue;
            }
            acc += self.hier.eval_detail(lvl.k, &buf, x)?;
        }
        Ok(acc)
    }

    /// Collapses the level sum at `y` onto the deepest contributing mesh
    /// and returns `(level, nodal coefficients)`. Every level detail lives
    /// in that mesh's space, so nodal sampling is exact and the result can
    /// be compared against reference solutions in the discrete norms.
    pub fn collapse(&self, y: &[f64]) -> Result<(u32, Vec<f64>)> {
        let k_top = self
            .levels
            .iter()
            .filter(|l| !matches!(l.kind, LevelKind::Empty))
            .map(|l| l.k)
            .max()
            .unwrap_or(0);
        let dim = self.hier.dim(k_top);
        let mut nodal = vec![0.0; dim];
        let mut buf = Vec::new();
        for lvl in &self.levels {
            self.merged_at(lvl, y, &mut buf);
            if buf.is_empty() {
                continue;
            }
            for (i, slot) in nodal.iter_mut().enumerate() {
                let x = self.hier.node(k_top, i);
                *slot += self.hier.eval_detail(lvl.k, &buf, x)?;
            }
        }
        Ok((k_top, nodal))
    }

    pub fn ledger_json(&self) -> serde_json::Value {
        json!({
            "variant": self.variant,
            "budget": self.budget,
            "seed": self.seed,
            "comp": self.comp(),
            "total_points": self.total_points(),
            "sample_pairs": self.sample_pairs(),
            "distinct_pairs": self.distinct_pairs(),
            "flagged_levels": self.flagged_levels(),
            "adjusted": self
                .adjusted
                .iter()
                .map(|(k, was, now)| json!({"k": k, "planned": was, "actual": now}))
                .collect::<Vec<_>>(),
            "levels": self
                .levels
                .iter()
                .map(|l| {
                    json!({
                        "k": l.k,
                        "points": l.points,
                        "m_k": l.set.as_ref().map(|s| s.len()).unwrap_or(0),
                        "empty": matches!(l.kind, LevelKind::Empty),
                        "retried": l.retried,
                        "flagged": l.flagged,
                    })
                })
                .collect::<Vec<_>>(),
        })
    }
}

fn level_seed(seed: u64, k: u32, attempt: u64) -> u64 {
    // distinct streams per level and retry attempt, stable across runs
    seed ^ (k as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15)
        ^ attempt.wrapping_mul(0xD6E8_FEB8_6659_FD93)
}

/// Runs the randomized least-squares recovery described by `plan` against
/// the details served by `source`. Each retained level draws its sample
/// batch from the planned density, evaluates the level detail there, and
/// fits all merged-frame components in one least-squares solve. A
/// rank-deficient fit is retried once from a fresh seed and flagged if the
/// deficiency persists.
///
/// For bar plans the promised bound is on the evaluation count, so the
/// driver trims the deepest levels first if the merged dimensions would
/// push `sample_pairs` past the budget; cuts are recorded in the ledger.
pub fn recover_ml_lsq<S>(
    plan: &LevelPlan,
    source: &mut S,
    hier: &SpatialHierarchy,
    seed: u64,
) -> Result<RecoveryResult>
where
    S: DeltaSource<Value = Vec<f64>>,
{
    if let Some(deepest) = plan.levels().last().map(|l| l.k) {
        if deepest > hier.max_level() {
            return Err(Error::contract(format!(
                "plan reaches level {deepest} but the hierarchy stops at {}",
                hier.max_level()
            )));
        }
    }

    // working copy of the per-level sample counts, possibly trimmed below
    let mut counts: Vec<usize> = plan.levels().iter().map(|l| l.n_k).collect();
    let mut adjusted = Vec::new();
    if plan.is_bar() {
        trim_to_budget(plan, hier, &mut counts, &mut adjusted);
    }

    let mut levels = Vec::with_capacity(plan.levels().len());
    for (spec, &n_k) in plan.levels().iter().zip(&counts) {
        let m_bar = hier.merged_dim(spec.k);
        if m_bar == 0 || n_k == 0 {
            levels.push(RecoveredLevel::empty(spec.k, Some(spec.set.clone())));
            continue;
        }
        let (fit, retried) = fit_level(spec, source, n_k, m_bar, seed)?;
        let flagged = fit.truncated();
        levels.push(RecoveredLevel {
            k: spec.k,
            points: n_k as u64,
            sample_pairs: m_bar as u64 * n_k as u64,
            distinct_pairs: m_bar as u64 * n_k as u64,
            set: Some(spec.set.clone()),
            retried,
            flagged,
            kind: LevelKind::Lsq(Box::new(fit)),
        });
    }

    Ok(RecoveryResult {
        hier: *hier,
        levels,
        variant: if plan.is_bar() { "ml-lsq-bar" } else { "ml-lsq" },
        budget: if plan.is_bar() {
            Some(plan.budget())
        } else {
            None
        },
        seed: Some(seed),
        adjusted,
    })
}

fn fit_level<S>(
    spec: &LevelSpec,
    source: &mut S,
    n_k: usize,
    m_bar: usize,
    seed: u64,
) -> Result<(LsqFit, bool)>
where
    S: DeltaSource<Value = Vec<f64>>,
{
    let mut attempt = 0u64;
    loop {
        let batch = draw_batch(&spec.density, n_k, level_seed(seed, spec.k, attempt));
        let mut samples = DMatrix::zeros(n_k, m_bar);
        for i in 0..n_k {
            let merged = source.eval_delta(spec.k, batch.point(i))?;
            if merged.len() != m_bar {
                return Err(Error::contract(format!(
                    "level {} detail has {} entries, expected {}",
                    spec.k,
                    merged.len(),
                    m_bar
                )));
            }
            for (j, v) in merged.iter().enumerate() {
                samples[(i, j)] = *v;
            }
        }
        let fit = lsq_fit(&batch, spec.set.members(), &samples)?;
        if !fit.truncated() || attempt == 1 {
            return Ok((fit, attempt == 1));
        }
        attempt += 1;
    }
}

/// Shrinks the deepest levels' sample counts until the evaluation total
/// `sum_k merged_dim(k) * n_k` fits the contract budget. A level whose
/// count would fall below the viability requirement for its planned set is
/// emptied entirely.
fn trim_to_budget(
    plan: &LevelPlan,
    hier: &SpatialHierarchy,
    counts: &mut [usize],
    adjusted: &mut Vec<(u32, usize, usize)>,
) {
    let budget = plan.budget();
    let dims: Vec<u64> = plan
        .levels()
        .iter()
        .map(|l| hier.merged_dim(l.k) as u64)
        .collect();
    let mut total: u64 = dims
        .iter()
        .zip(counts.iter())
        .map(|(d, c)| d * *c as u64)
        .sum();
    if total <= budget {
        return;
    }
    for idx in (0..counts.len()).rev() {
        if total <= budget {
            break;
        }
        if dims[idx] == 0 || counts[idx] == 0 {
            continue;
        }
        let spec = &plan.levels()[idx];
        let excess = total - budget;
        let cut = excess.div_ceil(dims[idx]) as usize;
        let floor = min_samples_for(spec.m_k(), plan.oversampling());
        let target = counts[idx].saturating_sub(cut);
        let new = if target < floor { 0 } else { target };
        total -= dims[idx] * (counts[idx] - new) as u64;
        adjusted.push((spec.k, counts[idx], new));
        counts[idx] = new;
    }
}

/// Options for [`recover_ml_interp`] beyond the operator parameters.
pub struct InterpOptions {
    /// Cap on any single index-set enumeration.
    pub set_cap: usize,
    /// Hard error bound on the total raw grid points, if any.
    pub max_points: Option<u64>,
    /// Evaluation budget recorded for the ledger contract check, if any.
    pub budget: Option<u64>,
}

impl Default for InterpOptions {
    fn default() -> Self {
        InterpOptions {
            set_cap: DEFAULT_ENUMERATION_CAP,
            max_points: None,
            budget: None,
        }
    }
}

/// Runs the deterministic interpolation recovery at threshold `xi`: one
/// sparse-grid interpolant per level on the regime's index-set family,
/// applied to the level details served by `source`.
#[allow(clippy::too_many_arguments)]
pub fn recover_ml_interp<S>(
    xi: f64,
    source: &mut S,
    hier: &SpatialHierarchy,
    ws1: &WeightSystem,
    ws2: &WeightSystem,
    alpha: f64,
    q1: f64,
    q2: f64,
    options: InterpOptions,
) -> Result<RecoveryResult>
where
    S: DeltaSource<Value = Vec<f64>>,
{
    let k_top = level_count(xi, q1, q2, alpha)?;
    if k_top > hier.max_level() {
        return Err(Error::contract(format!(
            "threshold asks for level {k_top} but the hierarchy stops at {}",
            hier.max_level()
        )));
    }
    let ml = multilevel_interpolate(
        xi,
        ws1,
        ws2,
        q1,
        q2,
        alpha,
        source,
        options.set_cap,
        options.max_points,
    )?;
    let mut levels = Vec::new();
    for piece in ml.into_pieces() {
        let m_bar = hier.merged_dim(piece.k) as u64;
        let raw = piece.interp.raw_point_count();
        let distinct = piece.interp.distinct_point_count() as u64;
        if m_bar == 0 {
            levels.push(RecoveredLevel::empty(piece.k, Some(piece.set)));
            continue;
        }
        levels.push(RecoveredLevel {
            k: piece.k,
            points: raw,
            sample_pairs: m_bar * raw,
            distinct_pairs: m_bar * distinct,
            set: Some(piece.set),
            retried: false,
            flagged: false,
            kind: LevelKind::Interp(Box::new(piece.interp)),
        });
    }
    Ok(RecoveryResult {
        hier: *hier,
        levels,
        variant: "ml-interp",
        budget: options.budget,
        seed: None,
        adjusted: Vec::new(),
    })
}

/// Single-level sparse interpolation of the full level-`k_work` solution on
/// the threshold set `{sigma_2 <= t}`. The source must serve merged frames
/// whose coarse half is zero (see `FullSolutionSource`); the result then
/// evaluates to the interpolated solution itself.
pub fn recover_single_interp<S>(
    t: f64,
    k_work: u32,
    source: &mut S,
    hier: &SpatialHierarchy,
    ws2: &WeightSystem,
    q2: f64,
    options: InterpOptions,
) -> Result<RecoveryResult>
where
    S: DeltaSource<Value = Vec<f64>>,
{
    if k_work > hier.max_level() {
        return Err(Error::contract(format!(
            "working level {k_work} beyond hierarchy depth {}",
            hier.max_level()
        )));
    }
    let set = enumerate_threshold_set(ws2, q2, t, options.set_cap)?;
    if set.is_empty() {
        return Err(Error::invalid(format!(
            "threshold {t} admits no index; the smallest weight exceeds it"
        )));
    }
    let m_bar = hier.merged_dim(k_work) as u64;
    let interp = interpolate_set(&set, |y| source.eval_delta(k_work, y))?;
    let raw = interp.raw_point_count();
    if let Some(cap) = options.max_points {
        if raw > cap {
            return Err(Error::BudgetExceeded(format!(
                "interpolation grid needs {raw} points against a cap of {cap}"
            )));
        }
    }
    let distinct = interp.distinct_point_count() as u64;
    let level = if m_bar == 0 {
        RecoveredLevel::empty(k_work, Some(set))
    } else {
        RecoveredLevel {
            k: k_work,
            points: raw,
            sample_pairs: m_bar * raw,
            distinct_pairs: m_bar * distinct,
            set: Some(set),
            retried: false,
            flagged: false,
            kind: LevelKind::Interp(Box::new(interp)),
        }
    };
    Ok(RecoveryResult {
        hier: *hier,
        levels: vec![level],
        variant: "sparse-interp",
        budget: options.budget,
        seed: None,
        adjusted: Vec::new(),
    })
}

/// Largest sigma threshold whose single-level interpolation grid stays
/// within `budget` distinct solve points. Distinct points, not raw ones:
/// for a reference surrogate the solves are the cost that matters, and
/// nested tensor grids share heavily.
pub fn threshold_for_point_budget(
    budget: u64,
    ws2: &WeightSystem,
    q2: f64,
    cap: usize,
) -> Result<f64> {
    let distinct_of = |t: f64| -> Result<Option<u64>> {
        let set = match enumerate_threshold_set(ws2, q2, t, cap) {
            Ok(s) => s,
            Err(Error::BudgetExceeded(_)) => return Ok(None),
            Err(e) => return Err(e),
        };
        if set.is_empty() {
            return Ok(Some(0));
        }
        let mut seen = std::collections::HashSet::new();
        for s in set.members() {
            for_each_grid_index(s, &mut |idx: &[u32]| {
                seen.insert(idx.to_vec());
            });
        }
        Ok(Some(seen.len() as u64))
    };
    let lo0 = ws2.sigma(&MultiIndex::zero())? * 1.000001;
    match distinct_of(lo0)? {
        Some(c) if c <= budget && c > 0 => {}
        _ => {
            return Err(Error::invalid(format!(
                "point budget {budget} cannot afford even the constant index"
            )))
        }
    }
    let mut lo = lo0;
    let mut hi = lo0;
    loop {
        hi *= 2.0;
        if hi > 1e12 {
            break;
        }
        match distinct_of(hi)? {
            Some(c) if c <= budget => lo = hi,
            _ => break,
        }
    }
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        match distinct_of(mid)? {
            Some(c) if c <= budget => lo = mid,
            _ => hi = mid,
        }
    }
    Ok(lo)
}

/// Visits the integer grid coordinates of the full tensor grid attached to
/// a member `s`: the product of per-coordinate ranges `0..=2 s_j`.
fn for_each_grid_index(s: &MultiIndex, visit: &mut impl FnMut(&[u32])) {
    let pairs: Vec<(u32, u32)> = s.iter().collect();
    let mut idx: Vec<u32> = vec![0; pairs.len()];
    loop {
        let flat: Vec<u32> = pairs
            .iter()
            .zip(&idx)
            .flat_map(|(&(j, _), &i)| [j, i])
            .collect();
        visit(&flat);
        let mut pos = 0;
        loop {
            if pos == pairs.len() {
                return;
            }
            if idx[pos] < 2 * pairs[pos].1 {
                idx[pos] += 1;
                break;
            }
            idx[pos] = 0;
            pos += 1;
        }
    }
}

/// Raw grid points of the combination-formula interpolant on `set`:
/// `sum_{s in set} prod_{j in supp s} (2 s_j + 1)`, counted without
/// building anything.
fn raw_points_of(set_members: &[MultiIndex]) -> u64 {
    set_members
        .iter()
        .map(|s| {
            s.iter()
                .map(|(_, t)| 2 * t as u64 + 1)
                .product::<u64>()
        })
        .sum()
}

/// Largest threshold `xi` whose interpolation run costs at most `n` scalar
/// evaluations, i.e. `sum_k merged_dim(k) * raw_k(xi) <= n`. Levels past
/// the hierarchy depth count as unaffordable, so the result always yields
/// a runnable operator. Returns an error when even thresholds just above
/// one do not fit.
#[allow(clippy::too_many_arguments)]
pub fn xi_for_sample_budget(
    n: u64,
    hier: &SpatialHierarchy,
    ws1: &WeightSystem,
    ws2: &WeightSystem,
    alpha: f64,
    q1: f64,
    q2: f64,
    set_cap: usize,
) -> Result<f64> {
    let pairs = |xi: f64| -> Result<Option<u64>> {
        let k_top = level_count(xi, q1, q2, alpha)?;
        if k_top > hier.max_level() {
            return Ok(None);
        }
        let mut total = 0u64;
        for k in 0..=k_top {
            let set = enumerate_level_set(ws1, ws2, q1, q2, alpha, xi, k, set_cap)?;
            total += hier.merged_dim(k) as u64 * raw_points_of(set.members());
        }
        Ok(Some(total))
    };
    let affordable = |xi: f64| -> Result<bool> {
        Ok(match pairs(xi)? {
            Some(total) => total <= n,
            None => false,
        })
    };

    let mut lo = 1.0 + 1e-9;
    if !affordable(lo)? {
        return Err(Error::invalid(format!(
            "budget {n} cannot pay for the minimal threshold"
        )));
    }
    let mut hi = 2.0;
    while affordable(hi)? {
        lo = hi;
        hi *= 2.0;
        if hi > 1e12 {
            break;
        }
    }
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if affordable(mid)? {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(lo)
}

/// Exact integer cost record of a finished run.
pub struct CompRecord {
    pub comp: u64,
    pub total_points: u64,
    pub sample_pairs: u64,
    pub distinct_pairs: u64,
    pub budget: Option<u64>,
    /// Per level: `(k, points, comp_weight(k) * points)`.
    pub levels: Vec<(u32, u64, u64)>,
}

impl CompRecord {
    pub fn to_json(&self) -> serde_json::Value {
        json!({
            "comp": self.comp,
            "total_points": self.total_points,
            "sample_pairs": self.sample_pairs,
            "distinct_pairs": self.distinct_pairs,
            "budget": self.budget,
            "levels": self
                .levels
                .iter()
                .map(|(k, p, c)| json!({"k": k, "points": p, "weighted": c}))
                .collect::<Vec<_>>(),
        })
    }
}

/// Recomputes the run's integer cost ledger from its levels and enforces
/// the evaluation-count contract: a run that promised a budget must have
/// spent at most that many scalar evaluations.
pub fn comp_account(result: &RecoveryResult) -> Result<CompRecord> {
    let levels: Vec<(u32, u64, u64)> = result
        .levels()
        .iter()
        .map(|l| (l.k, l.points, comp_weight(l.k) * l.points))
        .collect();
    let record = CompRecord {
        comp: levels.iter().map(|(_, _, c)| *c).sum(),
        total_points: result.total_points(),
        sample_pairs: result.sample_pairs(),
        distinct_pairs: result.distinct_pairs(),
        budget: result.budget(),
        levels,
    };
    if let Some(n) = record.budget {
        if record.sample_pairs > n {
            return Err(Error::contract(format!(
                "run spent {} evaluations against a budget of {n}",
                record.sample_pairs
            )));
        }
    }
    Ok(record)
}
