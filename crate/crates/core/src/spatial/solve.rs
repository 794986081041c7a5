//! Galerkin assembly and solve for `-(a u')' = f` on (0,1) with zero
//! boundary values, on one level of the dyadic hierarchy.
//!
//! The stiffness matrix is banded symmetric positive definite (bandwidth
//! equals the element order), so a direct band Cholesky factorization
//! solves each system in O(dim) time.

use std::io::Write as IoWrite;

use crate::error::{Error, Result};
use crate::spatial::mesh::{SpatialHierarchy, GAUSS4};
use crate::spatial::ParametricField;

/// Shape functions and derivatives on the reference cell [0, 1].
fn shapes(order: usize, t: f64) -> ([f64; 3], [f64; 3]) {
    if order == 1 {
        ([1.0 - t, t, 0.0], [-1.0, 1.0, 0.0])
    } else {
        (
            [
                (1.0 - t) * (1.0 - 2.0 * t),
                4.0 * t * (1.0 - t),
                t * (2.0 * t - 1.0),
            ],
            [4.0 * t - 3.0, 4.0 - 8.0 * t, 4.0 * t - 1.0],
        )
    }
}

/// Interior index of local node `local` in cell `cell`, or None on the
/// boundary.
fn global_index(order: usize, cells: usize, cell: usize, local: usize) -> Option<usize> {
    let g = order * cell + local;
    if g == 0 || g == order * cells {
        None
    } else {
        Some(g - 1)
    }
}

/// Lower-band symmetric storage: `band[d][i] = A[i + d, i]` for the
/// diagonals d = 0..=bw.
struct BandMatrix {
    dim: usize,
    bw: usize,
    band: Vec<f64>,
}

impl BandMatrix {
    fn zeros(dim: usize, bw: usize) -> Self {
        BandMatrix {
            dim,
            bw,
            band: vec![0.0; dim * (bw + 1)],
        }
    }

    fn add(&mut self, row: usize, col: usize, value: f64) {
        let (hi, lo) = if row >= col { (row, col) } else { (col, row) };
        debug_assert!(hi - lo <= self.bw);
        self.band[(hi - lo) * self.dim + lo] += value;
    }

    fn at(&self, d: usize, i: usize) -> f64 {
        self.band[d * self.dim + i]
    }

    /// In-place Cholesky `A = L L^T` on the band. Fails on non-positive
    /// pivots, which for this assembly only happens when the coefficient
    /// evaluated to NaN or infinity.
    fn cholesky(&mut self) -> Result<()> {
        let (n, bw) = (self.dim, self.bw);
        for j in 0..n {
            let mut s = self.at(0, j);
            for d in 1..=bw.min(j) {
                let l = self.band[d * n + (j - d)];
                s -= l * l;
            }
            if !(s > 0.0) {
                return Err(Error::Solver(format!(
                    "lost positive definiteness at row {j} (pivot {s})"
                )));
            }
            let pivot = s.sqrt();
            self.band[j] = pivot;
            for i in j + 1..(j + bw + 1).min(n) {
                let mut s = self.at(i - j, j);
                // overlap of the band profiles of rows i and j
                for k in i.saturating_sub(bw)..j {
                    s -= self.band[(i - k) * n + k] * self.band[(j - k) * n + k];
                }
                self.band[(i - j) * n + j] = s / pivot;
            }
        }
        Ok(())
    }

    /// Solves `L L^T x = b` in place after `cholesky`.
    fn solve(&self, b: &mut [f64]) {
        let (n, bw) = (self.dim, self.bw);
        for i in 0..n {
            let mut s = b[i];
            for k in i.saturating_sub(bw)..i {
                s -= self.band[(i - k) * n + k] * b[k];
            }
            b[i] = s / self.band[i];
        }
        for i in (0..n).rev() {
            let mut s = b[i];
            for k in i + 1..(i + bw + 1).min(n) {
                s -= self.band[(k - i) * n + i] * b[k];
            }
            b[i] = s / self.band[i];
        }
    }
}

/// Discrete solution at one level, self-contained for later evaluation.
#[derive(Debug, Clone, PartialEq)]
pub struct PdeSolution {
    hier: SpatialHierarchy,
    level: u32,
    coeffs: Vec<f64>,
}

impl PdeSolution {
    pub fn level(&self) -> u32 {
        self.level
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn hierarchy(&self) -> &SpatialHierarchy {
        &self.hier
    }

    /// Writes the nodal values, boundary included, as `x,u` rows.
    pub fn write_csv<W: IoWrite>(&self, mut out: W) -> Result<()> {
        writeln!(out, "x,u")?;
        writeln!(out, "0,0")?;
        for (i, c) in self.coeffs.iter().enumerate() {
            writeln!(out, "{},{}", self.hier.node(self.level, i), c)?;
        }
        writeln!(out, "1,0")?;
        Ok(())
    }
}

/// Point value of a discrete solution; `x` must lie in `[0, 1]` and the
/// boundary values are exactly zero.
pub fn evaluate_solution(sol: &PdeSolution, x: f64) -> Result<f64> {
    sol.hier.eval(sol.level, &sol.coeffs, x)
}

/// Assembles and solves the level-`k` Galerkin system for the coefficient
/// `a(x, y)` and a right-hand side rule, with 4-point Gauss quadrature per
/// cell.
pub fn assemble_and_solve<F: FnMut(f64) -> f64>(
    hier: &SpatialHierarchy,
    field: &ParametricField,
    k: u32,
    y: &[f64],
    mut rhs: F,
) -> Result<PdeSolution> {
    if k > hier.max_level() {
        return Err(Error::contract(format!(
            "level {k} beyond hierarchy depth {}",
            hier.max_level()
        )));
    }
    let order = hier.order();
    let cells = hier.cells(k);
    let dim = hier.dim(k);
    if dim == 0 {
        return Ok(PdeSolution {
            hier: *hier,
            level: k,
            coeffs: Vec::new(),
        });
    }
    let h = 1.0 / cells as f64;
    let mut matrix = BandMatrix::zeros(dim, order);
    let mut load = vec![0.0; dim];
    let nodes = order + 1;
    for cell in 0..cells {
        let x0 = cell as f64 * h;
        let mut k_loc = [[0.0f64; 3]; 3];
        let mut f_loc = [0.0f64; 3];
        for &(t, w) in &GAUSS4 {
            let x = x0 + t * h;
            let a = field.coeff(x, y);
            let f = rhs(x);
            let (shape, dshape) = shapes(order, t);
            for alpha in 0..nodes {
                f_loc[alpha] += w * h * f * shape[alpha];
                let da = w / h * a * dshape[alpha];
                for beta in alpha..nodes {
                    k_loc[alpha][beta] += da * dshape[beta];
                }
            }
        }
        for alpha in 0..nodes {
            let Some(row) = global_index(order, cells, cell, alpha) else {
                continue;
            };
            load[row] += f_loc[alpha];
            for beta in alpha..nodes {
                if let Some(col) = global_index(order, cells, cell, beta) {
                    matrix.add(row, col, k_loc[alpha][beta]);
                }
            }
        }
    }
    matrix.cholesky()?;
    matrix.solve(&mut load);
    if load.iter().any(|c| !c.is_finite()) {
        return Err(Error::Solver("non-finite solution coefficients".into()));
    }
    Ok(PdeSolution {
        hier: *hier,
        level: k,
        coeffs: load,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::{DMatrix, DVector};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn unit_field() -> ParametricField {
        ParametricField::with_truncation(0.0, 2.5, 4).unwrap()
    }

    fn default_field() -> ParametricField {
        ParametricField::with_truncation(0.6, 2.5, 32).unwrap()
    }

    #[test]
    fn constant_coefficient_solution_is_nodally_exact() {
        // -u'' = 1 has u = x(1-x)/2, and linear elements with exact load
        // integration reproduce it at the nodes
        let hier = SpatialHierarchy::new(8, 1, 1).unwrap();
        let field = unit_field();
        for k in [2u32, 5, 8] {
            let sol = assemble_and_solve(&hier, &field, k, &[], |_| 1.0).unwrap();
            for (i, c) in sol.coeffs().iter().enumerate() {
                let x = hier.node(k, i);
                assert!(
                    (c - x * (1.0 - x) / 2.0).abs() < 1e-12,
                    "level {k}, node {x}"
                );
            }
        }
    }

    #[test]
    fn quadratic_elements_reproduce_the_parabola_exactly() {
        let hier = SpatialHierarchy::new(6, 1, 2).unwrap();
        let field = unit_field();
        let sol = assemble_and_solve(&hier, &field, 3, &[], |_| 1.0).unwrap();
        for (i, c) in sol.coeffs().iter().enumerate() {
            let x = hier.node(3, i);
            assert!((c - x * (1.0 - x) / 2.0).abs() < 1e-12);
        }
        // interior of a cell too, since the solution lies in the space
        for x in [0.11, 0.47, 0.93] {
            let u = evaluate_solution(&sol, x).unwrap();
            assert!((u - x * (1.0 - x) / 2.0).abs() < 1e-12);
        }
    }

    #[test]
    fn zero_load_gives_the_zero_solution() {
        let hier = SpatialHierarchy::new(6, 1, 1).unwrap();
        let sol =
            assemble_and_solve(&hier, &default_field(), 5, &[0.3, -0.7], |_| 0.0).unwrap();
        assert!(sol.coeffs().iter().all(|&c| c == 0.0));
    }

    #[test]
    fn trivial_coarse_space_yields_an_empty_solution() {
        let hier = SpatialHierarchy::new(6, 1, 1).unwrap();
        let sol = assemble_and_solve(&hier, &unit_field(), 0, &[], |_| 1.0).unwrap();
        assert!(sol.coeffs().is_empty());
        assert_eq!(evaluate_solution(&sol, 0.5).unwrap(), 0.0);
    }

    #[test]
    fn band_solver_agrees_with_a_dense_factorization() {
        // independent check of assembly and band Cholesky: rebuild the same
        // system densely with nalgebra and compare solutions
        for order in [1usize, 2] {
            let hier = SpatialHierarchy::new(6, 1, order).unwrap();
            let field = default_field();
            let y = [0.9, -0.4, 0.2, 0.8];
            let k = 5u32;
            let sol = assemble_and_solve(&hier, &field, k, &y, |x| 1.0 + x).unwrap();

            let cells = hier.cells(k);
            let dim = hier.dim(k);
            let h = 1.0 / cells as f64;
            let mut dense = DMatrix::<f64>::zeros(dim, dim);
            let mut rhs = DVector::<f64>::zeros(dim);
            for cell in 0..cells {
                let x0 = cell as f64 * h;
                for &(t, w) in &GAUSS4 {
                    let x = x0 + t * h;
                    let a = field.coeff(x, &y);
                    let (shape, dshape) = shapes(order, t);
                    for alpha in 0..=order {
                        let Some(row) = global_index(order, cells, cell, alpha) else {
                            continue;
                        };
                        rhs[row] += w * h * (1.0 + x) * shape[alpha];
                        for beta in 0..=order {
                            if let Some(col) = global_index(order, cells, cell, beta) {
                                dense[(row, col)] +=
                                    w / h * a * dshape[alpha] * dshape[beta];
                            }
                        }
                    }
                }
            }
            let chol = dense.clone().cholesky().expect("assembled matrix is SPD");
            let reference = chol.solve(&rhs);
            for (a, b) in sol.coeffs().iter().zip(reference.iter()) {
                assert!((a - b).abs() < 1e-11, "order {order}");
            }
            // discrete residual of the band solution, which is the Galerkin
            // orthogonality statement for the nodal basis
            let u = DVector::from_column_slice(sol.coeffs());
            let res = (&dense * &u - &rhs).norm() / rhs.norm();
            assert!(res < 1e-10, "order {order}: relative residual {res}");
        }
    }

    #[test]
    fn self_convergence_slope_matches_the_element_order() {
        let y = [0.8, -0.5, 0.3];
        for order in [1usize, 2] {
            let hier = SpatialHierarchy::new(10, 1, order).unwrap();
            let field = default_field();
            let k_ref = 9u32;
            let reference =
                assemble_and_solve(&hier, &field, k_ref, &y, |_| 1.0).unwrap();
            let mut errs = Vec::new();
            for k in 3..=5u32 {
                let sol = assemble_and_solve(&hier, &field, k, &y, |_| 1.0).unwrap();
                let err = hier
                    .h1_seminorm_diff(k, sol.coeffs(), k_ref, reference.coeffs())
                    .unwrap();
                errs.push(err);
            }
            for pair in errs.windows(2) {
                let ratio = (pair[0] / pair[1]).log2();
                assert!(
                    (ratio - order as f64).abs() < 0.15,
                    "order {order}: log2 ratio {ratio}"
                );
            }
        }
    }

    #[test]
    fn parameter_dependence_is_smooth_and_positive() {
        let hier = SpatialHierarchy::new(6, 1, 1).unwrap();
        let field = default_field();
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for _ in 0..5 {
            let y: Vec<f64> = (0..8).map(|_| rng.gen_range(-2.0..2.0)).collect();
            let sol = assemble_and_solve(&hier, &field, 5, &y, |_| 1.0).unwrap();
            // a > 0 and f = 1 force a positive solution inside the domain
            for (i, c) in sol.coeffs().iter().enumerate() {
                assert!(*c > 0.0, "node {i} gave {c}");
            }
        }
    }

    #[test]
    fn non_finite_parameters_surface_as_solver_errors() {
        let hier = SpatialHierarchy::new(6, 1, 1).unwrap();
        let res = assemble_and_solve(&hier, &default_field(), 4, &[f64::NAN], |_| 1.0);
        assert!(matches!(res, Err(Error::Solver(_))));
        let res = assemble_and_solve(&hier, &default_field(), 9, &[0.1], |_| 1.0);
        assert!(matches!(res, Err(Error::ContractViolation(_))));
    }

    #[test]
    fn evaluation_contract_on_the_domain() {
        let hier = SpatialHierarchy::new(6, 1, 1).unwrap();
        let sol = assemble_and_solve(&hier, &unit_field(), 4, &[], |_| 1.0).unwrap();
        assert_eq!(evaluate_solution(&sol, 0.0).unwrap(), 0.0);
        assert_eq!(evaluate_solution(&sol, 1.0).unwrap(), 0.0);
        assert!(evaluate_solution(&sol, -0.2).is_err());
        assert!(evaluate_solution(&sol, 1.0001).is_err());
    }

    #[test]
    fn csv_dump_lists_all_nodes_with_boundaries() {
        let hier = SpatialHierarchy::new(4, 1, 1).unwrap();
        let sol = assemble_and_solve(&hier, &unit_field(), 2, &[], |_| 1.0).unwrap();
        let mut buf = Vec::new();
        sol.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 1 + hier.dim(2) + 2);
        assert_eq!(lines[0], "x,u");
        assert_eq!(lines[1], "0,0");
        assert_eq!(*lines.last().unwrap(), "1,0");
        assert!(lines[2].starts_with("0.25,"));
    }
}
