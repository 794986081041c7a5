//! Dyadic mesh hierarchy on (0,1) with nodal interpolation, detail frames
//! and discrete H1 norms.
//!
//! Level `k` partitions the interval into `n0 * 2^k` equal cells carrying
//! continuous piecewise polynomials of order 1 or 2 with zero boundary
//! values. Meshes are uniform, so the hierarchy stores no per-level data;
//! everything is computed from `(n0, order, k)`.

use crate::error::{Error, Result};

/// 4-point Gauss-Legendre rule on [0, 1]: exact through degree 7, which
/// covers every piecewise-polynomial integrand this module produces.
pub(crate) const GAUSS4: [(f64, f64); 4] = [
    (0.06943184420297371, 0.17392742256872692),
    (0.33000947820757187, 0.32607257743127305),
    (0.6699905217924281, 0.32607257743127305),
    (0.9305681557970262, 0.17392742256872692),
];

/// Nested family of finite element spaces `V_0 subset V_1 subset ...` on
/// dyadically refined uniform meshes, with the Lagrange interpolation
/// operators `P_k` onto them.
///
/// `dim V_k = order * n0 * 2^k - 1` interior nodes; boundary values are
/// pinned to zero. With the default `n0 = 1` and linear elements the
/// coarsest space is trivial and `P_0 = 0`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SpatialHierarchy {
    max_level: u32,
    n0: usize,
    order: usize,
}

impl SpatialHierarchy {
    pub fn new(max_level: u32, n0: usize, order: usize) -> Result<Self> {
        if n0 == 0 {
            return Err(Error::invalid("need at least one coarse cell"));
        }
        if !(order == 1 || order == 2) {
            return Err(Error::invalid(format!(
                "element order {order} not supported (1 or 2)"
            )));
        }
        if max_level > 28 || (n0 << max_level) > (1usize << 30) {
            return Err(Error::invalid(format!(
                "hierarchy of level {max_level} with {n0} coarse cells is \
                 too deep"
            )));
        }
        Ok(SpatialHierarchy {
            max_level,
            n0,
            order,
        })
    }

    pub fn max_level(&self) -> u32 {
        self.max_level
    }

    pub fn n0(&self) -> usize {
        self.n0
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn cells(&self, k: u32) -> usize {
        self.n0 << k
    }

    /// Interior degrees of freedom of `V_k`.
    pub fn dim(&self, k: u32) -> usize {
        self.order * self.cells(k) - 1
    }

    /// Length of the merged detail frame at level `k`, fine nodes then
    /// coarse nodes.
    pub fn merged_dim(&self, k: u32) -> usize {
        if k == 0 {
            self.dim(0)
        } else {
            self.dim(k) + self.dim(k - 1)
        }
    }

    /// Interior node `i` of level `k`.
    pub fn node(&self, k: u32, i: usize) -> f64 {
        debug_assert!(i < self.dim(k));
        (i + 1) as f64 / (self.order * self.cells(k)) as f64
    }

    fn check_level(&self, k: u32) -> Result<()> {
        if k > self.max_level {
            return Err(Error::contract(format!(
                "level {k} beyond hierarchy depth {}",
                self.max_level
            )));
        }
        Ok(())
    }

    fn check_domain(&self, x: f64) -> Result<()> {
        if !(0.0..=1.0).contains(&x) {
            return Err(Error::contract(format!("point {x} outside [0, 1]")));
        }
        Ok(())
    }

    /// `P_k v`: nodal values of `v` at the interior interpolation nodes.
    pub fn project<F: FnMut(f64) -> f64>(&self, k: u32, mut v: F) -> Result<Vec<f64>> {
        self.check_level(k)?;
        let dim = self.dim(k);
        let mut coeffs = Vec::with_capacity(dim);
        for i in 0..dim {
            let x = self.node(k, i);
            let val = v(x);
            if !val.is_finite() {
                return Err(Error::NonFinite(format!("nodal value at x = {x}")));
            }
            coeffs.push(val);
        }
        Ok(coeffs)
    }

    /// `delta_k v` in the merged nodal frame: values of `v` at the level-`k`
    /// nodes followed by its values at the level-`k-1` nodes. The frame
    /// carries the basis signs, not the stored values: evaluation subtracts
    /// the coarse part. For `k = 0` the frame is just `P_0 v`.
    pub fn detail<F: FnMut(f64) -> f64>(&self, k: u32, mut v: F) -> Result<Vec<f64>> {
        self.check_level(k)?;
        let mut merged = self.project(k, &mut v)?;
        if k > 0 {
            merged.extend(self.project(k - 1, &mut v)?);
        }
        Ok(merged)
    }

    fn local_values(&self, k: u32, coeffs: &[f64], cell: usize) -> (f64, f64, f64) {
        let cells = self.cells(k);
        if self.order == 1 {
            let left = if cell == 0 { 0.0 } else { coeffs[cell - 1] };
            let right = if cell + 1 == cells { 0.0 } else { coeffs[cell] };
            (left, 0.0, right)
        } else {
            let left = if cell == 0 { 0.0 } else { coeffs[2 * cell - 1] };
            let mid = coeffs[2 * cell];
            let right = if cell + 1 == cells {
                0.0
            } else {
                coeffs[2 * cell + 1]
            };
            (left, mid, right)
        }
    }

    fn locate(&self, k: u32, x: f64) -> (usize, f64) {
        let cells = self.cells(k);
        let scaled = x * cells as f64;
        let cell = (scaled as usize).min(cells - 1);
        (cell, scaled - cell as f64)
    }

    fn check_coeffs(&self, k: u32, coeffs: &[f64]) -> Result<()> {
        self.check_level(k)?;
        if coeffs.len() != self.dim(k) {
            return Err(Error::contract(format!(
                "coefficient vector of length {} for dim V_{k} = {}",
                coeffs.len(),
                self.dim(k)
            )));
        }
        Ok(())
    }

    /// Value of the `V_k` element with interior coefficients `coeffs` at
    /// `x`, which must lie in `[0, 1]`; the boundary values are zero.
    pub fn eval(&self, k: u32, coeffs: &[f64], x: f64) -> Result<f64> {
        self.check_coeffs(k, coeffs)?;
        self.check_domain(x)?;
        Ok(self.eval_unchecked(k, coeffs, x))
    }

    pub(crate) fn eval_unchecked(&self, k: u32, coeffs: &[f64], x: f64) -> f64 {
        let (cell, t) = self.locate(k, x);
        let (l, m, r) = self.local_values(k, coeffs, cell);
        if self.order == 1 {
            (1.0 - t) * l + t * r
        } else {
            l * (1.0 - t) * (1.0 - 2.0 * t) + m * 4.0 * t * (1.0 - t) + r * t * (2.0 * t - 1.0)
        }
    }

    /// Spatial derivative of the `V_k` element at `x`; at cell boundaries
    /// the value from the containing cell of `locate` is returned.
    pub fn eval_deriv(&self, k: u32, coeffs: &[f64], x: f64) -> Result<f64> {
        self.check_coeffs(k, coeffs)?;
        self.check_domain(x)?;
        Ok(self.eval_deriv_unchecked(k, coeffs, x))
    }

    fn eval_deriv_unchecked(&self, k: u32, coeffs: &[f64], x: f64) -> f64 {
        let (cell, t) = self.locate(k, x);
        let (l, m, r) = self.local_values(k, coeffs, cell);
        let scale = self.cells(k) as f64;
        if self.order == 1 {
            (r - l) * scale
        } else {
            (l * (4.0 * t - 3.0) + m * (4.0 - 8.0 * t) + r * (4.0 * t - 1.0)) * scale
        }
    }

    /// Evaluates a merged detail frame: fine part minus coarse part.
    pub fn eval_detail(&self, k: u32, merged: &[f64], x: f64) -> Result<f64> {
        self.check_level(k)?;
        self.check_domain(x)?;
        if merged.len() != self.merged_dim(k) {
            return Err(Error::contract(format!(
                "merged frame of length {} at level {k}, expected {}",
                merged.len(),
                self.merged_dim(k)
            )));
        }
        let fine_dim = self.dim(k);
        let fine = self.eval_unchecked(k, &merged[..fine_dim], x);
        if k == 0 {
            return Ok(fine);
        }
        let coarse = self.eval_unchecked(k - 1, &merged[fine_dim..], x);
        Ok(fine - coarse)
    }

    fn eval_detail_deriv_unchecked(&self, k: u32, merged: &[f64], x: f64) -> f64 {
        let fine_dim = self.dim(k);
        let fine = self.eval_deriv_unchecked(k, &merged[..fine_dim], x);
        if k == 0 {
            return fine;
        }
        fine - self.eval_deriv_unchecked(k - 1, &merged[fine_dim..], x)
    }

    /// H1 seminorm of the difference of two discrete elements, integrated
    /// exactly with per-cell Gauss quadrature on the finer of the two
    /// meshes.
    pub fn h1_seminorm_diff(
        &self,
        ka: u32,
        a: &[f64],
        kb: u32,
        b: &[f64],
    ) -> Result<f64> {
        self.check_coeffs(ka, a)?;
        self.check_coeffs(kb, b)?;
        let kq = ka.max(kb);
        let cells = self.cells(kq);
        let h = 1.0 / cells as f64;
        let mut acc = 0.0;
        for cell in 0..cells {
            let x0 = cell as f64 * h;
            for &(t, w) in &GAUSS4 {
                let x = x0 + t * h;
                let d =
                    self.eval_deriv_unchecked(ka, a, x) - self.eval_deriv_unchecked(kb, b, x);
                acc += w * h * d * d;
            }
        }
        Ok(acc.sqrt())
    }

    /// H1 seminorm distance between a discrete element and a function with
    /// known derivative, by Gauss quadrature on the level-`kq` mesh.
    pub fn h1_seminorm_vs<F: FnMut(f64) -> f64>(
        &self,
        k: u32,
        coeffs: &[f64],
        mut deriv: F,
        kq: u32,
    ) -> Result<f64> {
        self.check_coeffs(k, coeffs)?;
        self.check_level(kq)?;
        let cells = self.cells(kq.max(k));
        let h = 1.0 / cells as f64;
        let mut acc = 0.0;
        for cell in 0..cells {
            let x0 = cell as f64 * h;
            for &(t, w) in &GAUSS4 {
                let x = x0 + t * h;
                let d = self.eval_deriv_unchecked(k, coeffs, x) - deriv(x);
                acc += w * h * d * d;
            }
        }
        Ok(acc.sqrt())
    }

    /// H1 seminorm of a merged detail frame against a reference element,
    /// on the finer of the two meshes.
    pub fn h1_seminorm_detail_diff(
        &self,
        k: u32,
        merged: &[f64],
        kr: u32,
        reference: &[f64],
    ) -> Result<f64> {
        self.check_level(k)?;
        self.check_coeffs(kr, reference)?;
        if merged.len() != self.merged_dim(k) {
            return Err(Error::contract(format!(
                "merged frame of length {} at level {k}",
                merged.len()
            )));
        }
        let cells = self.cells(k.max(kr));
        let h = 1.0 / cells as f64;
        let mut acc = 0.0;
        for cell in 0..cells {
            let x0 = cell as f64 * h;
            for &(t, w) in &GAUSS4 {
                let x = x0 + t * h;
                let d = self.eval_detail_deriv_unchecked(k, merged, x)
                    - self.eval_deriv_unchecked(kr, reference, x);
                acc += w * h * d * d;
            }
        }
        Ok(acc.sqrt())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn hier(order: usize) -> SpatialHierarchy {
        SpatialHierarchy::new(10, 1, order).unwrap()
    }

    #[test]
    fn dimensions_and_nodes_follow_the_dyadic_layout() {
        let h1 = hier(1);
        assert_eq!(h1.dim(0), 0);
        assert_eq!(h1.dim(3), 7);
        assert_eq!(h1.node(3, 0), 1.0 / 8.0);
        assert_eq!(h1.node(3, 6), 7.0 / 8.0);
        let h2 = hier(2);
        assert_eq!(h2.dim(0), 1);
        assert_eq!(h2.dim(3), 15);
        assert_eq!(h2.node(0, 0), 0.5);
        let wide = SpatialHierarchy::new(4, 3, 1).unwrap();
        assert_eq!(wide.cells(2), 12);
        assert_eq!(wide.dim(2), 11);
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(SpatialHierarchy::new(3, 0, 1).is_err());
        assert!(SpatialHierarchy::new(3, 1, 3).is_err());
        assert!(SpatialHierarchy::new(40, 1, 1).is_err());
    }

    #[test]
    fn projector_reproduces_its_own_space() {
        for order in [1, 2] {
            let h = hier(order);
            let mut rng = ChaCha8Rng::seed_from_u64(5 + order as u64);
            let coeffs: Vec<f64> = (0..h.dim(4)).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let again = h
                .project(4, |x| h.eval_unchecked(4, &coeffs, x))
                .unwrap();
            for (a, b) in coeffs.iter().zip(&again) {
                assert!((a - b).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn nestedness_holds_under_refinement() {
        for order in [1, 2] {
            let h = hier(order);
            let mut rng = ChaCha8Rng::seed_from_u64(9);
            for k in 1..=5u32 {
                let coarse: Vec<f64> =
                    (0..h.dim(k - 1)).map(|_| rng.gen_range(-1.0..1.0)).collect();
                let fine = h
                    .project(k, |x| h.eval_unchecked(k - 1, &coarse, x))
                    .unwrap();
                for _ in 0..50 {
                    let x: f64 = rng.gen();
                    let a = h.eval(k - 1, &coarse, x).unwrap();
                    let b = h.eval(k, &fine, x).unwrap();
                    assert!((a - b).abs() < 1e-12, "order {order} level {k} at {x}");
                }
            }
        }
    }

    #[test]
    fn linear_interpolation_error_is_the_textbook_value() {
        // for v = x(1-x) on a uniform linear mesh the interpolation error
        // on each cell has constant curvature, giving the H1 seminorm
        // h / sqrt(3) exactly; the quadrature is exact for the integrand
        let h = hier(1);
        for k in 2..=6u32 {
            let coeffs = h.project(k, |x| x * (1.0 - x)).unwrap();
            let err = h
                .h1_seminorm_vs(k, &coeffs, |x| 1.0 - 2.0 * x, k)
                .unwrap();
            let cell = 1.0 / h.cells(k) as f64;
            let expect = cell / 3.0f64.sqrt();
            assert!(
                (err - expect).abs() < 1e-12,
                "level {k}: {err} vs {expect}"
            );
        }
    }

    #[test]
    fn interpolation_error_slope_matches_the_element_order() {
        fn smooth(x: f64) -> (f64, f64) {
            let v = x * (1.0 - x) * (x + 0.3).sin();
            let d = (1.0 - 2.0 * x) * (x + 0.3).sin() + x * (1.0 - x) * (x + 0.3).cos();
            (v, d)
        }
        for order in [1usize, 2] {
            let h = hier(order);
            let mut prev = f64::NAN;
            for k in 4..=8u32 {
                let coeffs = h.project(k, |x| smooth(x).0).unwrap();
                let err = h
                    .h1_seminorm_vs(k, &coeffs, |x| smooth(x).1, k + 2)
                    .unwrap();
                if !prev.is_nan() {
                    let ratio = (prev / err).log2();
                    assert!(
                        (ratio - order as f64).abs() < 0.15,
                        "order {order}, level {k}: log2 ratio {ratio}"
                    );
                }
                prev = err;
            }
        }
    }

    #[test]
    fn coarsest_projection_interpolates_through_the_coarse_nodes() {
        let h = SpatialHierarchy::new(4, 2, 1).unwrap();
        let coeffs = h.project(0, |x| (3.0 * x).cos()).unwrap();
        assert_eq!(coeffs.len(), 1);
        assert_eq!(coeffs[0], (1.5f64).cos());
    }

    #[test]
    fn details_telescope_to_the_finest_projection() {
        for order in [1, 2] {
            let h = hier(order);
            let v = |x: f64| (2.5 * x).sin() * (1.0 - x);
            let top = 5u32;
            let fine = h.project(top, v).unwrap();
            let frames: Vec<Vec<f64>> = (0..=top).map(|k| h.detail(k, v).unwrap()).collect();
            let mut rng = ChaCha8Rng::seed_from_u64(77);
            for _ in 0..50 {
                let x: f64 = rng.gen();
                let sum: f64 = frames
                    .iter()
                    .enumerate()
                    .map(|(k, fr)| h.eval_detail(k as u32, fr, x).unwrap())
                    .sum();
                let direct = h.eval(top, &fine, x).unwrap();
                assert!((sum - direct).abs() < 1e-12, "order {order} at {x}");
            }
        }
    }

    #[test]
    fn detail_of_a_coarse_element_vanishes() {
        let h = hier(2);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let coarse: Vec<f64> = (0..h.dim(3)).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let frame = h
            .detail(4, |x| h.eval_unchecked(3, &coarse, x))
            .unwrap();
        for _ in 0..100 {
            let x: f64 = rng.gen();
            assert!(h.eval_detail(4, &frame, x).unwrap().abs() < 1e-12);
        }
    }

    #[test]
    fn merged_frame_matches_the_two_projection_paths() {
        for order in [1, 2] {
            let h = hier(order);
            let v = |x: f64| (7.0 * x).sin() + x * x;
            let k = 5u32;
            let frame = h.detail(k, v).unwrap();
            let fine = h.project(k, v).unwrap();
            let coarse = h.project(k - 1, v).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(123);
            for _ in 0..100 {
                let x: f64 = rng.gen();
                let merged = h.eval_detail(k, &frame, x).unwrap();
                let direct =
                    h.eval(k, &fine, x).unwrap() - h.eval(k - 1, &coarse, x).unwrap();
                assert!(
                    (merged - direct).abs() < 1e-12,
                    "order {order} at x = {x}"
                );
            }
        }
    }

    #[test]
    fn evaluation_respects_the_boundary_and_the_domain() {
        let h = hier(1);
        let coeffs = h.project(3, |x| x * (1.0 - x)).unwrap();
        assert_eq!(h.eval(3, &coeffs, 0.0).unwrap(), 0.0);
        assert_eq!(h.eval(3, &coeffs, 1.0).unwrap(), 0.0);
        assert_eq!(h.eval(3, &coeffs, 0.375).unwrap(), coeffs[2]);
        assert!(h.eval(3, &coeffs, -0.1).is_err());
        assert!(h.eval(3, &coeffs, 1.1).is_err());
        assert!(h.eval(3, &coeffs[..3], 0.5).is_err());
    }

    #[test]
    fn mid_cell_values_match_the_local_polynomial() {
        // quadratic elements: compare against the explicit shape functions
        // on one cell
        let h = hier(2);
        let coeffs = h.project(2, |x| (1.3 * x).exp() - 1.0 - 1.0 * x).unwrap();
        // cell 1 of 4 spans [0.25, 0.5]; local nodes at 0.25, 0.3125, 0.375
        let (l, m, r) = (coeffs[1], coeffs[2], coeffs[3]);
        for t in [0.2, 0.5, 0.9] {
            let x = 0.25 + 0.25 * t;
            let expect = l * (1.0 - t) * (1.0 - 2.0 * t)
                + m * 4.0 * t * (1.0 - t)
                + r * t * (2.0 * t - 1.0);
            assert!((h.eval(2, &coeffs, x).unwrap() - expect).abs() < 1e-12);
        }
    }

    #[test]
    fn projection_propagates_non_finite_values() {
        let h = hier(1);
        let res = h.project(3, |x| if x > 0.4 { f64::NAN } else { x });
        assert!(matches!(res, Err(Error::NonFinite(_))));
    }

    #[test]
    fn seminorm_of_discrete_differences_is_mesh_symmetric() {
        let h = hier(1);
        let a = h.project(3, |x| x * (1.0 - x)).unwrap();
        let b = h.project(5, |x| (x * (1.0 - x)).powi(2)).unwrap();
        let ab = h.h1_seminorm_diff(3, &a, 5, &b).unwrap();
        let ba = h.h1_seminorm_diff(5, &b, 3, &a).unwrap();
        assert!((ab - ba).abs() < 1e-13);
        assert!(h.h1_seminorm_diff(3, &a, 3, &a).unwrap() == 0.0);
    }
}
