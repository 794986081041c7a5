//! Per-coordinate building blocks: cardinal basis rows and the sequential,
//! one-coordinate-at-a-time evaluation of the tensor difference operator.
//! The sequential path is the defining form of `Delta_s` and serves as an
//! independent reference for the combination-formula operator.

use crate::error::{Error, Result};
use crate::hermite::{hermite_roots, two_sum, NodeRow};
use crate::multiindex::MultiIndex;
use std::sync::Arc;

/// All cardinal values `L_{m;k}(y)`, `k` over the node row, normalized so
/// the row sums to 1. An exact node hit returns the exact unit vector.
pub(crate) fn cardinal_row(row: &NodeRow, y: f64, out: &mut Vec<f64>) {
    let roots = row.roots();
    out.clear();
    if roots.len() == 1 {
        out.push(1.0);
        return;
    }
    if let Some(hit) = roots.iter().position(|&r| r == y) {
        out.resize(roots.len(), 0.0);
        out[hit] = 1.0;
        return;
    }
    let bary = row.bary();
    let bary_lo = row.bary_lo();
    let mut den = 0.0;
    let mut den_lo = 0.0;
    for i in 0..roots.len() {
        // same compensation as the univariate evaluator: fold the node
        // subtraction error, the division residual and the weight's low limb
        // into each partial fraction term
        let (dy, dy_err) = two_sum(y, -roots[i]);
        let t = bary[i] / dy;
        let t_err = -t.mul_add(dy, -bary[i]) / dy + (bary_lo[i] - t * dy_err) / dy;
        out.push(t + t_err);
        let (s, e) = two_sum(den, t);
        den = s;
        den_lo += e + t_err;
    }
    let total = den + den_lo;
    for v in out.iter_mut() {
        *v /= total;
    }
}

struct CoordinateDelta {
    slot: usize,
    upper: Arc<NodeRow>,
    upper_row: Vec<f64>,
    lower: Arc<NodeRow>,
    lower_row: Vec<f64>,
}

/// Evaluates `Delta_s(f)` at `y` by applying the univariate difference one
/// coordinate at a time: interpolate at the coordinate's degree, subtract
/// the interpolant one degree lower, recurse on the remaining coordinates at
/// every node. Coordinates outside the support of `s` are pinned to 0, so
/// the result depends on `y_j` only for `j` in the support.
///
/// [`super::delta_tensor`] builds the same operator from the
/// inclusion-exclusion expansion; beyond the node tables the two paths share
/// nothing and are compared against each other in tests.
pub fn delta_eval_sequential<F>(s: &MultiIndex, mut f: F, y: &[f64]) -> Result<f64>
where
    F: FnMut(&[f64]) -> f64,
{
    let mut levels = Vec::with_capacity(s.support_len());
    for (j, m) in s.iter() {
        let yj = y.get(j as usize - 1).copied().unwrap_or(0.0);
        let upper = hermite_roots(m)?;
        let mut upper_row = Vec::new();
        cardinal_row(&upper, yj, &mut upper_row);
        let lower = hermite_roots(m - 1)?;
        let mut lower_row = Vec::new();
        cardinal_row(&lower, yj, &mut lower_row);
        levels.push(CoordinateDelta {
            slot: j as usize - 1,
            upper,
            upper_row,
            lower,
            lower_row,
        });
    }
    let mut buf = vec![0.0; s.max_coordinate() as usize];
    descend(&levels, 0, &mut buf, &mut f)
}

fn descend<F>(levels: &[CoordinateDelta], depth: usize, buf: &mut Vec<f64>, f: &mut F) -> Result<f64>
where
    F: FnMut(&[f64]) -> f64,
{
    if depth == levels.len() {
        let v = f(buf);
        if !v.is_finite() {
            return Err(Error::NonFinite(format!("sample value at {buf:?}")));
        }
        return Ok(v);
    }
    let lvl = &levels[depth];
    let mut acc = 0.0;
    for (i, &c) in lvl.upper_row.iter().enumerate() {
        buf[lvl.slot] = lvl.upper.roots()[i];
        acc += c * descend(levels, depth + 1, buf, f)?;
    }
    for (i, &c) in lvl.lower_row.iter().enumerate() {
        buf[lvl.slot] = lvl.lower.roots()[i];
        acc -= c * descend(levels, depth + 1, buf, f)?;
    }
    buf[lvl.slot] = 0.0;
    Ok(acc)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hermite::{delta_1d, lagrange_basis};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn cardinal_row_hits_nodes_exactly_and_sums_to_one() {
        let mut out = Vec::new();
        for m in [0u32, 1, 2, 5, 9, 14] {
            let row = hermite_roots(m).unwrap();
            for (i, &r) in row.roots().iter().enumerate() {
                cardinal_row(&row, r, &mut out);
                for (k, &v) in out.iter().enumerate() {
                    assert_eq!(v, if k == i { 1.0 } else { 0.0 });
                }
            }
            let mut rng = ChaCha8Rng::seed_from_u64(9 + m as u64);
            for _ in 0..20 {
                let y = rng.gen_range(-4.0..4.0);
                cardinal_row(&row, y, &mut out);
                let sum: f64 = out.iter().sum();
                assert!((sum - 1.0).abs() < 1e-13, "m={m} y={y} sum={sum}");
            }
        }
    }

    #[test]
    fn cardinal_row_matches_single_basis_evaluations() {
        let mut out = Vec::new();
        for m in [1u32, 3, 6, 8] {
            let row = hermite_roots(m).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(100 + m as u64);
            for _ in 0..10 {
                let y: f64 = rng.gen_range(-3.0..3.0);
                cardinal_row(&row, y, &mut out);
                for (pos, &v) in out.iter().enumerate() {
                    let k = row.signed_index(pos);
                    let want = lagrange_basis(m, k, y).unwrap();
                    assert!(
                        (v - want).abs() < 1e-9 * want.abs().max(1.0),
                        "m={m} k={k} y={y}: {v} vs {want}"
                    );
                }
            }
        }
    }

    #[test]
    fn sequential_delta_on_one_coordinate_matches_the_univariate_operator() {
        let f = |y: f64| (0.7 * y).sin() + 0.25 * y * y;
        for m in 1u32..=6 {
            let reference = delta_1d(m, f).unwrap();
            let s = MultiIndex::from_pairs([(1u32, m)]).unwrap();
            for &y in &[-2.3, -0.4, 0.0, 0.9, 3.1] {
                let got = delta_eval_sequential(&s, |p: &[f64]| f(p[0]), &[y]).unwrap();
                let want = reference.eval(y);
                assert!((got - want).abs() < 1e-12, "m={m} y={y}: {got} vs {want}");
            }
        }
    }

    #[test]
    fn sequential_zero_index_evaluates_at_the_origin() {
        let s = MultiIndex::zero();
        let got = delta_eval_sequential(&s, |p: &[f64]| 4.5 - p.iter().sum::<f64>(), &[1.0, 2.0])
            .unwrap();
        assert_eq!(got, 4.5);
    }

    #[test]
    fn sequential_delta_pins_unsupported_coordinates_to_zero() {
        // s touches only coordinate 2, so the value must ignore y_1 and
        // sample f at points whose first coordinate is 0
        let s = MultiIndex::from_pairs([(2u32, 2)]).unwrap();
        let f = |p: &[f64]| (1.0 + p[0] * p[0]) * p[1].cos();
        let a = delta_eval_sequential(&s, f, &[5.0, 0.8]).unwrap();
        let b = delta_eval_sequential(&s, f, &[-3.0, 0.8]).unwrap();
        assert_eq!(a, b);
        delta_eval_sequential(
            &s,
            |p: &[f64]| {
                assert_eq!(p[0], 0.0);
                p[1]
            },
            &[5.0, 0.8],
        )
        .unwrap();
    }

    #[test]
    fn sequential_delta_rejects_non_finite_samples() {
        let s = MultiIndex::from_pairs([(1u32, 1)]).unwrap();
        let err = delta_eval_sequential(&s, |p: &[f64]| 1.0 / p[0], &[0.5]);
        assert!(matches!(err, Err(Error::NonFinite(_))));
    }
}
