//! Detail providers for the level-stacked operators.
//!
//! Both recovery drivers consume level details through the same trait, so a
//! single solve cache serves every level and both operator variants. A
//! level-`k` detail needs the solutions on meshes `k` and `k - 1`; caching
//! by `(level, parameter bits)` lets adjacent levels share the overlapping
//! solve instead of repeating it.

use std::collections::HashMap;

use crate::error::Result;
use crate::sparsegrid::DeltaSource;
use crate::spatial::{assemble_and_solve, ParametricField, SpatialHierarchy};

/// Detail source backed by the dyadic finite element solver. The merged
/// frame of a detail is the plain concatenation of the fine and coarse
/// nodal coefficient vectors; the coarse-side sign convention lives in the
/// hierarchy's evaluation routines.
pub struct PdeDeltaSource<'a, F: FnMut(f64) -> f64> {
    hier: &'a SpatialHierarchy,
    field: &'a ParametricField,
    rhs: F,
    cache: HashMap<(u32, Vec<u64>), Vec<f64>>,
    solves: u64,
    hits: u64,
}

impl<'a, F: FnMut(f64) -> f64> PdeDeltaSource<'a, F> {
    pub fn new(hier: &'a SpatialHierarchy, field: &'a ParametricField, rhs: F) -> Self {
        PdeDeltaSource {
            hier,
            field,
            rhs,
            cache: HashMap::new(),
            solves: 0,
            hits: 0,
        }
    }

    /// Number of linear systems actually assembled and factorized.
    pub fn solves(&self) -> u64 {
        self.solves
    }

    /// Number of detail requests answered from the cache.
    pub fn cache_hits(&self) -> u64 {
        self.hits
    }

    fn solution(&mut self, k: u32, y: &[f64]) -> Result<Vec<f64>> {
        let key = (k, canonical_bits(y));
        if let Some(cached) = self.cache.get(&key) {
            self.hits += 1;
            return Ok(cached.clone());
        }
        let sol = assemble_and_solve(self.hier, self.field, k, y, &mut self.rhs)?;
        self.solves += 1;
        let coeffs = sol.coeffs().to_vec();
        self.cache.insert(key, coeffs.clone());
        Ok(coeffs)
    }
}

impl<'a, F: FnMut(f64) -> f64> DeltaSource for PdeDeltaSource<'a, F> {
    type Value = Vec<f64>;

    fn eval_delta(&mut self, k: u32, y: &[f64]) -> Result<Vec<f64>> {
        let mut merged = self.solution(k, y)?;
        if k > 0 {
            let coarse = self.solution(k - 1, y)?;
            merged.extend_from_slice(&coarse);
        }
        Ok(merged)
    }
}

/// Exact cache key for a parameter point: trailing zeros are dropped (a
/// shorter vector and its zero-padded extension denote the same point) and
/// the rest is taken bit for bit, so distinct floats never collide.
fn canonical_bits(y: &[f64]) -> Vec<u64> {
    let mut end = y.len();
    while end > 0 && y[end - 1] == 0.0 {
        end -= 1;
    }
    y[..end].iter().map(|v| v.to_bits()).collect()
}

/// Source for the single-level operators: every request returns the full
/// level-`k` solution with a zeroed coarse half, so the merged-frame
/// evaluation reduces to the solution itself instead of a detail.
pub struct FullSolutionSource<'a, F: FnMut(f64) -> f64> {
    hier: &'a SpatialHierarchy,
    field: &'a ParametricField,
    rhs: F,
    cache: HashMap<(u32, Vec<u64>), Vec<f64>>,
    solves: u64,
}

impl<'a, F: FnMut(f64) -> f64> FullSolutionSource<'a, F> {
    pub fn new(hier: &'a SpatialHierarchy, field: &'a ParametricField, rhs: F) -> Self {
        FullSolutionSource {
            hier,
            field,
            rhs,
            cache: HashMap::new(),
            solves: 0,
        }
    }

    pub fn solves(&self) -> u64 {
        self.solves
    }
}

impl<'a, F: FnMut(f64) -> f64> DeltaSource for FullSolutionSource<'a, F> {
    type Value = Vec<f64>;

    fn eval_delta(&mut self, k: u32, y: &[f64]) -> Result<Vec<f64>> {
        let key = (k, canonical_bits(y));
        if let Some(cached) = self.cache.get(&key) {
            return Ok(cached.clone());
        }
        let sol = assemble_and_solve(self.hier, self.field, k, y, &mut self.rhs)?;
        self.solves += 1;
        let mut merged = sol.coeffs().to_vec();
        merged.resize(self.hier.merged_dim(k), 0.0);
        self.cache.insert(key, merged.clone());
        Ok(merged)
    }
}

/// Detail source for closed-form targets `v(x, y)`: the detail is the nodal
/// projection difference between consecutive meshes, stored in the merged
/// frame. Used by tests and the reproduction examples.
pub struct AnalyticDeltaSource<'a, F> {
    hier: &'a SpatialHierarchy,
    v: F,
}

impl<'a, F: FnMut(f64, &[f64]) -> f64> AnalyticDeltaSource<'a, F> {
    pub fn new(hier: &'a SpatialHierarchy, v: F) -> Self {
        AnalyticDeltaSource { hier, v }
    }
}

impl<'a, F: FnMut(f64, &[f64]) -> f64> DeltaSource for AnalyticDeltaSource<'a, F> {
    type Value = Vec<f64>;

    fn eval_delta(&mut self, k: u32, y: &[f64]) -> Result<Vec<f64>> {
        let v = &mut self.v;
        self.hier.detail(k, |x| v(x, y))
    }
}
