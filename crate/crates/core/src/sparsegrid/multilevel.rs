//! The level-stacked interpolation operator: one sparse-grid interpolant per
//! dyadic spatial level, applied to the level's detail function, with index
//! sets shrinking geometrically in the level.

use super::operator::{interpolate_set, SparseInterpolant};
use super::LinearValue;
use crate::error::{Error, Result};
use crate::multiindex::{enumerate_level_set, IndexSet, WeightSystem};
use std::io::Write;

/// Supplies the level-`k` detail `delta_k v` of the target at a parametric
/// point. Implementations typically solve the underlying problem on the
/// level-`k` and level-`(k-1)` meshes at `y` once and subtract; the operator
/// requests each distinct `y` only once per level.
pub trait DeltaSource {
    type Value: LinearValue;
    fn eval_delta(&mut self, k: u32, y: &[f64]) -> Result<Self::Value>;
}

/// One level of the stacked operator: the index set it was built from and
/// the interpolant of the level detail.
pub struct LevelPiece<V> {
    pub k: u32,
    pub set: IndexSet,
    pub interp: SparseInterpolant<V>,
}

/// Result of [`multilevel_interpolate`]: the per-level interpolants plus the
/// cost ledger. Levels hold details of different mesh resolutions, so
/// combining their values is left to the caller (the values may live in
/// spaces of different dimensions).
pub struct MultilevelInterpolant<V> {
    pieces: Vec<LevelPiece<V>>,
    comp: u64,
}

impl<V: LinearValue> MultilevelInterpolant<V> {
    pub fn pieces(&self) -> &[LevelPiece<V>] {
        &self.pieces
    }

    pub fn into_pieces(self) -> Vec<LevelPiece<V>> {
        self.pieces
    }

    /// Weighted cost `sum_k comp_weight(k) * n_k` with `n_k` the raw
    /// per-level sample counts.
    pub fn comp(&self) -> u64 {
        self.comp
    }

    pub fn raw_points(&self) -> u64 {
        self.pieces.iter().map(|p| p.interp.raw_point_count()).sum()
    }

    pub fn distinct_points(&self) -> u64 {
        self.pieces
            .iter()
            .map(|p| p.interp.distinct_point_count() as u64)
            .sum()
    }

    /// Concatenated per-level ledgers, one CSV header in total.
    pub fn write_ledger_csv<W: Write>(&self, w: &mut W) -> Result<()> {
        for (i, piece) in self.pieces.iter().enumerate() {
            if i == 0 {
                piece.interp.write_ledger_csv(piece.k, w)?;
            } else {
                let mut body = Vec::new();
                piece.interp.write_ledger_csv(piece.k, &mut body)?;
                let text = String::from_utf8_lossy(&body);
                for line in text.lines().skip(1) {
                    writeln!(w, "{line}")?;
                }
            }
        }
        Ok(())
    }
}

/// Dimension weight of the space holding a level-`k` detail: the detail
/// spans the level-`k` and level-`(k-1)` meshes, `2^k + 2^{k-1}` cells. At
/// `k = 0` there is no coarser space and the weight is 1.
pub fn comp_weight(k: u32) -> u64 {
    if k == 0 {
        1
    } else {
        (1u64 << k) + (1u64 << (k - 1))
    }
}

/// Top level `k(xi)` of the stack; levels run over `0..=level_count(..)`.
/// Below the rate split `alpha <= 1/q2 - 1/2` the stack is `log2(xi)` deep;
/// above it the depth is scaled by the ratio of the threshold decay
/// exponents.
pub fn level_count(xi: f64, q1: f64, q2: f64, alpha: f64) -> Result<u32> {
    if !(q1 > 0.0 && q2 >= q1 && q2 < 2.0) {
        return Err(Error::invalid(format!(
            "need 0 < q1 <= q2 < 2, got q1={q1}, q2={q2}"
        )));
    }
    if !(xi > 1.0 && xi.is_finite()) {
        return Err(Error::invalid("xi must exceed 1"));
    }
    let top = if alpha <= 1.0 / q2 - 0.5 {
        xi.log2()
    } else {
        let eta = 2.0 * alpha / (2.0 - q2);
        let theta = (2.0 / (2.0 - q2)) * (1.0 / q1 - 0.5);
        theta / eta * xi.log2()
    };
    Ok(top.floor() as u32)
}

/// Builds `sum_k I_{Lambda_k(xi)}(delta_k v)` for `k = 0..=k(xi)`. Each
/// level's index set comes from [`enumerate_level_set`] with the rate-regime
/// case split on `alpha` against `1/q2 - 1/2`. `set_cap` bounds any single
/// enumeration; `max_points`, when given, bounds the running raw sample
/// count across levels.
pub fn multilevel_interpolate<S: DeltaSource>(
    xi: f64,
    ws1: &WeightSystem,
    ws2: &WeightSystem,
    q1: f64,
    q2: f64,
    alpha: f64,
    source: &mut S,
    set_cap: usize,
    max_points: Option<u64>,
) -> Result<MultilevelInterpolant<S::Value>> {
    let top = level_count(xi, q1, q2, alpha)?;
    let mut pieces = Vec::new();
    let mut comp = 0u64;
    let mut total = 0u64;
    for k in 0..=top {
        let set = enumerate_level_set(ws1, ws2, q1, q2, alpha, xi, k, set_cap)?;
        if set.is_empty() {
            // thresholds stay >= 1 for k <= k(xi), so this is defensive only
            continue;
        }
        let interp = interpolate_set(&set, |y| source.eval_delta(k, y))?;
        total += interp.raw_point_count();
        if let Some(cap) = max_points {
            if total > cap {
                return Err(Error::BudgetExceeded(format!(
                    "level {k} raises the raw sample count to {total}, over the cap {cap}"
                )));
            }
        }
        comp += comp_weight(k) * interp.raw_point_count();
        pieces.push(LevelPiece { k, set, interp });
    }
    Ok(MultilevelInterpolant { pieces, comp })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::multiindex::{DecayRule, LevelRegime, MultiIndex, SetKind};

    struct FnSource<F>(F);

    impl<F: FnMut(u32, &[f64]) -> Result<f64>> DeltaSource for FnSource<F> {
        type Value = f64;

        fn eval_delta(&mut self, k: u32, y: &[f64]) -> Result<f64> {
            (self.0)(k, y)
        }
    }

    /// rho_j = 2^j exactly, so sigma values are small integers squared.
    fn dyadic_ws(eta: u32) -> WeightSystem {
        let fact: u32 = (1..=eta).product();
        WeightSystem::new(
            DecayRule::Geometric {
                scale: 1.0,
                ratio: 0.25,
            },
            0.5,
            4.0 * (fact as f64).sqrt(),
            eta,
        )
        .unwrap()
    }

    /// Independent raw-count arithmetic: sum over members and masks of the
    /// effective grid sizes.
    fn expected_raw(set: &IndexSet) -> u64 {
        set.members()
            .iter()
            .map(|s| {
                let orders: Vec<u32> = s.iter().map(|(_, t)| t).collect();
                let mut total = 0u64;
                for bits in 0u32..(1 << orders.len()) {
                    let mut prod = 1u64;
                    for (i, &t) in orders.iter().enumerate() {
                        let eff = t - (bits >> i & 1);
                        prod *= eff as u64 + 1;
                    }
                    total += prod;
                }
                total
            })
            .sum()
    }

    #[test]
    fn xi_barely_above_one_gives_a_single_minimal_level() {
        let ws = dyadic_ws(2);
        let mut calls = 0u32;
        let mut src = FnSource(|k: u32, y: &[f64]| {
            calls += 1;
            assert_eq!(k, 0);
            assert!(y.is_empty());
            Ok(3.5)
        });
        let ml = multilevel_interpolate(1.5, &ws, &ws, 1.0, 1.0, 0.3, &mut src, 10_000, None)
            .unwrap();
        assert_eq!(ml.pieces().len(), 1);
        let piece = &ml.pieces()[0];
        assert_eq!(piece.k, 0);
        assert_eq!(piece.set.members(), &[MultiIndex::zero()]);
        assert_eq!(ml.comp(), 1);
        assert_eq!(ml.raw_points(), 1);
        assert_eq!(calls, 1);
        assert_eq!(piece.interp.eval(&[2.0]), 3.5);
    }

    #[test]
    fn level_sets_are_nested_and_counts_match_the_formula() {
        let ws = dyadic_ws(2);
        let mut src = FnSource(|k: u32, y: &[f64]| {
            Ok((k as f64 + 1.0) * (1.0 + y.iter().sum::<f64>()).cos())
        });
        let ml = multilevel_interpolate(64.0, &ws, &ws, 1.0, 1.0, 0.3, &mut src, 10_000, None)
            .unwrap();
        assert_eq!(ml.pieces().len(), 7);
        let mut comp = 0u64;
        for (i, piece) in ml.pieces().iter().enumerate() {
            assert_eq!(piece.k, i as u32);
            assert_eq!(piece.interp.raw_point_count(), expected_raw(&piece.set));
            comp += comp_weight(piece.k) * piece.interp.raw_point_count();
            if i > 0 {
                let prev = &ml.pieces()[i - 1].set;
                for s in piece.set.members() {
                    assert!(prev.contains(s), "level {i} member {s} missing at {}", i - 1);
                }
            }
        }
        assert_eq!(ml.comp(), comp);
        assert!(ml.distinct_points() <= ml.raw_points());
    }

    #[test]
    fn regime_split_changes_depth_and_set_kind() {
        let ws = dyadic_ws(2);
        // q1 = q2 = 1: the split sits at alpha = 1/2
        let shallow = level_count(16.0, 1.0, 1.0, 0.3).unwrap();
        assert_eq!(shallow, 4);
        // eta = 2, theta = 1: depth log2(xi) * 1/2
        let deep = level_count(16.0, 1.0, 1.0, 1.0).unwrap();
        assert_eq!(deep, 2);

        let mut src = FnSource(|_, _: &[f64]| Ok(1.0));
        let ml = multilevel_interpolate(16.0, &ws, &ws, 1.0, 1.0, 1.0, &mut src, 10_000, None)
            .unwrap();
        for piece in ml.pieces() {
            match piece.set.kind() {
                SetKind::Level { regime, .. } => assert_eq!(*regime, LevelRegime::LargeAlpha),
                other => panic!("unexpected set kind {other:?}"),
            }
        }
    }

    #[test]
    fn detail_evaluations_are_deduplicated_per_level() {
        let ws = dyadic_ws(2);
        let mut calls = 0u64;
        let mut src = FnSource(|_, y: &[f64]| {
            calls += 1;
            Ok(y.first().copied().unwrap_or(0.0) + 1.0)
        });
        let ml = multilevel_interpolate(32.0, &ws, &ws, 1.0, 1.0, 0.3, &mut src, 10_000, None)
            .unwrap();
        assert_eq!(calls, ml.distinct_points());
        assert!(ml.raw_points() > ml.distinct_points());
    }

    #[test]
    fn point_budget_is_enforced() {
        let ws = dyadic_ws(2);
        let mut src = FnSource(|_, _: &[f64]| Ok(0.0));
        let err =
            multilevel_interpolate(64.0, &ws, &ws, 1.0, 1.0, 0.3, &mut src, 10_000, Some(3));
        assert!(matches!(err, Err(Error::BudgetExceeded(_))));
    }

    #[test]
    fn source_failures_propagate() {
        let ws = dyadic_ws(2);
        let mut src = FnSource(|k: u32, _: &[f64]| {
            if k >= 1 {
                Err(Error::Solver("mesh failure".into()))
            } else {
                Ok(1.0)
            }
        });
        let err = multilevel_interpolate(8.0, &ws, &ws, 1.0, 1.0, 0.3, &mut src, 10_000, None);
        assert!(matches!(err, Err(Error::Solver(_))));
    }

    #[test]
    fn invalid_arguments_are_rejected() {
        assert!(level_count(1.0, 1.0, 1.0, 0.3).is_err());
        assert!(level_count(4.0, 1.0, 2.0, 0.3).is_err());
        assert!(level_count(4.0, 0.8, 0.5, 0.3).is_err());
        assert_eq!(comp_weight(0), 1);
        assert_eq!(comp_weight(1), 3);
        assert_eq!(comp_weight(4), 24);
    }

    #[test]
    fn multilevel_ledger_has_one_header_and_level_tags() {
        let ws = dyadic_ws(2);
        let mut src = FnSource(|_, y: &[f64]| Ok(1.0 + y.iter().sum::<f64>()));
        let ml = multilevel_interpolate(8.0, &ws, &ws, 1.0, 1.0, 0.3, &mut src, 10_000, None)
            .unwrap();
        let mut buf = Vec::new();
        ml.write_ledger_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let headers = text.lines().filter(|l| l.starts_with("level,")).count();
        assert_eq!(headers, 1);
        let rows = text.lines().count() as u64 - 1;
        assert_eq!(rows, ml.raw_points());
        for k in 0..ml.pieces().len() {
            assert!(text.lines().any(|l| l.starts_with(&format!("{k},"))));
        }
    }
}
