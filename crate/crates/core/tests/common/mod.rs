//! Oracle helpers shared by the integration suites. Everything here sticks
//! to direct formulas (dense tensors, factored Vandermonde solves, rejection
//! growth) so it exercises none of the operator code paths it is used to
//! check.

#![allow(dead_code)]

use bochner_recover::hermite::{hermite_eval, hermite_roots};
use bochner_recover::multiindex::MultiIndex;
use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::Rng;

/// Dense tensor of coefficients over the box `0..=dbox[j]` per coordinate,
/// row-major with the last coordinate fastest.
pub struct CoefficientBox {
    pub dbox: Vec<u32>,
    pub coeff: Vec<f64>,
}

impl CoefficientBox {
    pub fn index_of(&self, s: &MultiIndex) -> Option<usize> {
        let mut idx = 0usize;
        for (axis, &d) in self.dbox.iter().enumerate() {
            let t = s.get(axis as u32 + 1);
            if t > d {
                return None;
            }
            idx = idx * (d as usize + 1) + t as usize;
        }
        if s.max_coordinate() as usize > self.dbox.len() {
            return None;
        }
        Some(idx)
    }

    /// Multi-index for a flat position, for iterating every box entry.
    pub fn unrank(&self, mut flat: usize) -> MultiIndex {
        let mut orders = vec![0u32; self.dbox.len()];
        for axis in (0..self.dbox.len()).rev() {
            let n = self.dbox[axis] as usize + 1;
            orders[axis] = (flat % n) as u32;
            flat /= n;
        }
        MultiIndex::from_dense(&orders)
    }
}

/// Expands a function known to be a polynomial of coordinate degree at most
/// `dbox[j]` into tensor Hermite coefficients: sample it on the full tensor
/// grid of Hermite nodes, then solve the one-dimensional Vandermonde system
/// `H_b(y_a)` along each axis in turn.
pub fn gpc_coefficients<F: FnMut(&[f64]) -> f64>(mut f: F, dbox: &[u32]) -> CoefficientBox {
    let dims = dbox.len();
    let sizes: Vec<usize> = dbox.iter().map(|&d| d as usize + 1).collect();
    let total: usize = sizes.iter().product();

    let grids: Vec<Vec<f64>> = dbox
        .iter()
        .map(|&d| hermite_roots(d).unwrap().roots().to_vec())
        .collect();

    let mut data = vec![0.0f64; total];
    let mut point = vec![0.0f64; dims];
    for (flat, slot) in data.iter_mut().enumerate() {
        let mut rem = flat;
        for axis in (0..dims).rev() {
            let n = sizes[axis];
            point[axis] = grids[axis][rem % n];
            rem /= n;
        }
        *slot = f(&point);
    }

    // transform one axis at a time; stride of the last axis is 1
    for axis in 0..dims {
        let n = sizes[axis];
        let vand = DMatrix::from_fn(n, n, |a, b| hermite_eval(b as u32, grids[axis][a]));
        let lu = vand.lu();
        let stride: usize = sizes[axis + 1..].iter().product();
        let block = stride * n;
        let lines = total / n;
        for line in 0..lines {
            let base = (line / stride) * block + line % stride;
            let rhs = DVector::from_fn(n, |i, _| data[base + i * stride]);
            let sol = lu.solve(&rhs).expect("Hermite Vandermonde is invertible");
            for i in 0..n {
                data[base + i * stride] = sol[i];
            }
        }
    }

    CoefficientBox {
        dbox: dbox.to_vec(),
        coeff: data,
    }
}

/// `H_s(y)` as a product of univariate evaluations.
pub fn hermite_tensor(s: &MultiIndex, y: &[f64]) -> f64 {
    s.iter()
        .map(|(j, t)| hermite_eval(t, y.get(j as usize - 1).copied().unwrap_or(0.0)))
        .product()
}

/// Grows a random downward-closed set: starting from the zero index, keep
/// proposing `member + e_j` and accept when every predecessor is already
/// present. `max_deg` caps the order per coordinate.
pub fn random_downward_closed<R: Rng>(
    rng: &mut R,
    dims: u32,
    target: usize,
    max_deg: u32,
) -> Vec<MultiIndex> {
    let mut members = vec![MultiIndex::zero()];
    let mut attempts = 0u32;
    while members.len() < target && attempts < 40 * target as u32 {
        attempts += 1;
        let base = members.choose(rng).unwrap().clone();
        let j = rng.gen_range(1..=dims);
        if base.get(j) >= max_deg {
            continue;
        }
        let cand = base.incremented(j);
        if members.contains(&cand) {
            continue;
        }
        let closed = cand
            .support()
            .all(|c| members.contains(&cand.decremented(c).unwrap()));
        if closed {
            members.push(cand);
        }
    }
    members
}
