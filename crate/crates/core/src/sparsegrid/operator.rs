//! The combination-formula interpolant and its sample-point ledger.

use super::tensor::cardinal_row;
use super::LinearValue;
use crate::error::{Error, Result};
use crate::hermite::{NodeRow, RootCache};
use crate::multiindex::{IndexSet, MultiIndex};
use std::collections::hash_map::Entry;
use std::collections::{HashMap, HashSet};
use std::io::Write;
use std::sync::Arc;

/// One realized sample location of a tensor grid: the effective degree
/// `t = s - e` of the grid that first produced it, the signed node index per
/// coordinate, and the coordinates themselves. Coordinates outside the
/// support of `t` are exactly 0.
#[derive(Debug, Clone)]
pub struct GridPoint {
    degree: MultiIndex,
    node: Vec<i32>,
    coords: Vec<f64>,
}

impl GridPoint {
    pub fn degree(&self) -> &MultiIndex {
        &self.degree
    }

    /// Signed node index per coordinate; 0 outside the support of `degree`.
    pub fn node(&self) -> &[i32] {
        &self.node
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords
    }
}

/// One inclusion-exclusion term `(-1)^{|e|_1} I_{s-e}` of the expansion.
struct TermPlan {
    source: MultiIndex,
    mask: Vec<u32>, // coordinates where e_j = 1
    sign: f64,
    rows: Vec<(u32, Arc<NodeRow>)>, // support of s - e with that coordinate's node row
    point_ids: Vec<usize>, // odometer order over pi_{s-e}, last coordinate fastest
}

/// A function of finitely many Gaussian coordinates stored as a signed sum
/// of tensor Lagrange interpolants that share one deduplicated table of
/// sampled values.
///
/// The ledger distinguishes the raw sample count (every node of every term,
/// the paper-facing cost) from the deduplicated count (the evaluations
/// actually performed; nested grids share `y = 0` and little else).
pub struct SparseInterpolant<V> {
    dim: usize,
    terms: Vec<TermPlan>,
    points: Vec<GridPoint>,
    values: Vec<V>,
    raw_count: u64,
}

/// Tensor-product interpolant `I_s` on the full grid `pi_s`.
pub fn tensor_interpolant<V, F>(s: &MultiIndex, f: F) -> Result<SparseInterpolant<V>>
where
    V: LinearValue,
    F: FnMut(&[f64]) -> Result<V>,
{
    build(vec![(s.clone(), Vec::new())], f)
}

/// Difference operator `Delta_s` expanded by inclusion-exclusion over the
/// support of `s`.
pub fn delta_tensor<V, F>(s: &MultiIndex, f: F) -> Result<SparseInterpolant<V>>
where
    V: LinearValue,
    F: FnMut(&[f64]) -> Result<V>,
{
    build(expansion_jobs(std::slice::from_ref(s))?, f)
}

/// Sparse-grid interpolation `I_Lambda = sum of Delta_s over s in Lambda`.
/// `Lambda` must be downward closed (and therefore non-empty).
pub fn interpolate_set<V, F>(lambda: &IndexSet, f: F) -> Result<SparseInterpolant<V>>
where
    V: LinearValue,
    F: FnMut(&[f64]) -> Result<V>,
{
    if lambda.is_empty() {
        return Err(Error::contract("interpolation set is empty"));
    }
    if !lambda.is_downward_closed() {
        return Err(Error::contract("interpolation set is not downward closed"));
    }
    build(expansion_jobs(lambda.members())?, f)
}

/// Flattens members into `(s, mask)` jobs, one per term of the expansion.
fn expansion_jobs(members: &[MultiIndex]) -> Result<Vec<(MultiIndex, Vec<u32>)>> {
    let mut jobs = Vec::new();
    for s in members {
        let sup: Vec<u32> = s.support().collect();
        if sup.len() >= 25 {
            return Err(Error::BudgetExceeded(format!(
                "index {s} has {} active coordinates; its expansion has 2^{} terms",
                sup.len(),
                sup.len()
            )));
        }
        for bits in 0u32..(1u32 << sup.len()) {
            let mask: Vec<u32> = sup
                .iter()
                .enumerate()
                .filter(|&(i, _)| bits >> i & 1 == 1)
                .map(|(_, &j)| j)
                .collect();
            jobs.push((s.clone(), mask));
        }
    }
    Ok(jobs)
}

fn build<V, F>(jobs: Vec<(MultiIndex, Vec<u32>)>, mut f: F) -> Result<SparseInterpolant<V>>
where
    V: LinearValue,
    F: FnMut(&[f64]) -> Result<V>,
{
    let dim = jobs
        .iter()
        .map(|(s, _)| s.max_coordinate())
        .max()
        .unwrap_or(0) as usize;
    let cache = RootCache::shared();
    let mut terms = Vec::with_capacity(jobs.len());
    let mut points: Vec<GridPoint> = Vec::new();
    let mut values: Vec<V> = Vec::new();
    let mut seen: HashMap<Vec<u64>, usize> = HashMap::new();
    let mut raw_count = 0u64;

    for (s, mask) in jobs {
        let sign = if mask.len() % 2 == 0 { 1.0 } else { -1.0 };
        let degree = s.minus_mask(&mask);
        let mut rows = Vec::with_capacity(degree.support_len());
        for (j, t) in degree.iter() {
            rows.push((j, cache.row(t)?));
        }
        let mut point_ids = Vec::new();
        let mut pos = vec![0usize; rows.len()];
        'nodes: loop {
            let mut coords = vec![0.0; dim];
            let mut node = vec![0i32; dim];
            for (a, (j, row)) in rows.iter().enumerate() {
                let slot = *j as usize - 1;
                coords[slot] = row.roots()[pos[a]];
                node[slot] = row.signed_index(pos[a]);
            }
            raw_count += 1;
            let key: Vec<u64> = coords.iter().map(|c| c.to_bits()).collect();
            let id = match seen.entry(key) {
                Entry::Occupied(o) => *o.get(),
                Entry::Vacant(slot) => {
                    let v = f(&coords)?;
                    if !v.all_finite() {
                        return Err(Error::NonFinite(format!("sample value at {coords:?}")));
                    }
                    let id = points.len();
                    points.push(GridPoint {
                        degree: degree.clone(),
                        node,
                        coords,
                    });
                    values.push(v);
                    slot.insert(id);
                    id
                }
            };
            point_ids.push(id);
            let mut a = rows.len();
            loop {
                if a == 0 {
                    break 'nodes;
                }
                a -= 1;
                pos[a] += 1;
                if pos[a] < rows[a].1.roots().len() {
                    continue 'nodes;
                }
                pos[a] = 0;
            }
        }
        terms.push(TermPlan {
            source: s,
            mask,
            sign,
            rows,
            point_ids,
        });
    }

    Ok(SparseInterpolant {
        dim,
        terms,
        points,
        values,
        raw_count,
    })
}

impl<V: LinearValue> SparseInterpolant<V> {
    /// Largest coordinate the interpolant depends on.
    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Total node count over all terms, duplicates included. This is the
    /// sample-point count that enters complexity accounting.
    pub fn raw_point_count(&self) -> u64 {
        self.raw_count
    }

    pub fn distinct_point_count(&self) -> usize {
        self.points.len()
    }

    /// Deduplicated sample locations, in first-seen order.
    pub fn points(&self) -> &[GridPoint] {
        &self.points
    }

    /// Sampled values, parallel to [`Self::points`].
    pub fn values(&self) -> &[V] {
        &self.values
    }

    pub fn term_count(&self) -> usize {
        self.terms.len()
    }

    /// Evaluates the interpolant. Coordinates beyond the end of `y` are
    /// treated as 0; trailing entries of `y` beyond the ambient dimension
    /// are ignored (the interpolant does not depend on them).
    pub fn eval(&self, y: &[f64]) -> V {
        let mut acc = self.values[0].zero_like();
        // cardinal rows depend only on (coordinate, degree), so they are
        // computed once per eval and shared across terms
        let mut rows_at: HashMap<(u32, u32), Vec<f64>> = HashMap::new();
        for term in &self.terms {
            for (j, row) in &term.rows {
                rows_at.entry((*j, row.degree())).or_insert_with(|| {
                    let yj = y.get(*j as usize - 1).copied().unwrap_or(0.0);
                    let mut out = Vec::new();
                    cardinal_row(row, yj, &mut out);
                    out
                });
            }
            let slices: Vec<&[f64]> = term
                .rows
                .iter()
                .map(|(j, row)| rows_at[&(*j, row.degree())].as_slice())
                .collect();
            let mut pos = vec![0usize; slices.len()];
            let mut idx = 0usize;
            'nodes: loop {
                let mut coeff = term.sign;
                for (a, slice) in slices.iter().enumerate() {
                    coeff *= slice[pos[a]];
                }
                acc.axpy(coeff, &self.values[term.point_ids[idx]]);
                idx += 1;
                let mut a = slices.len();
                loop {
                    if a == 0 {
                        break 'nodes;
                    }
                    a -= 1;
                    pos[a] += 1;
                    if pos[a] < slices[a].len() {
                        continue 'nodes;
                    }
                    pos[a] = 0;
                }
            }
        }
        acc
    }

    /// Writes the ledger as CSV, one row per raw grid-point occurrence:
    /// `level, s, e, node, y1..y<dim>, raw_count_flag`. The flag is 1 the
    /// first time a distinct point occurs, so summing the flag column gives
    /// the deduplicated count while the row count gives the raw count.
    /// Vector fields are space-separated; an empty mask or node prints `-`.
    pub fn write_ledger_csv<W: Write>(&self, level: u32, w: &mut W) -> Result<()> {
        write!(w, "level,s,e,node")?;
        for j in 1..=self.dim {
            write!(w, ",y{j}")?;
        }
        writeln!(w, ",raw_count_flag")?;
        let mut first = HashSet::new();
        for term in &self.terms {
            let mask = if term.mask.is_empty() {
                "-".to_string()
            } else {
                term.mask
                    .iter()
                    .map(|j| j.to_string())
                    .collect::<Vec<_>>()
                    .join(" ")
            };
            for &id in &term.point_ids {
                let p = &self.points[id];
                let node = if p.node.is_empty() {
                    "-".to_string()
                } else {
                    p.node
                        .iter()
                        .map(|k| k.to_string())
                        .collect::<Vec<_>>()
                        .join(" ")
                };
                write!(w, "{level},{},{mask},{node}", term.source)?;
                for c in &p.coords {
                    write!(w, ",{c:.17e}")?;
                }
                writeln!(w, ",{}", u8::from(first.insert(id)))?;
            }
        }
        Ok(())
    }
}
