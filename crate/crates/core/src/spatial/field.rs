//! Log-normal diffusion coefficient `a(x, y) = exp(sum_j y_j psi_j(x))`
//! with `psi_j(x) = c j^-theta sin(j pi x)`, truncated to finitely many
//! active coordinates for evaluation.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spatial::SpatialHierarchy;

/// Default number of active coordinates. The selection rule in
/// [`truncation_for_tolerance`] asks for thousands of terms at tolerance
/// 1e-10 when theta = 2.5, which would dominate every solve; 64 keeps the
/// neglected oscillation below the finest discretization error reachable
/// in the experiment ladder (`truncation_rms` reports the actual size).
pub const DEFAULT_TRUNCATION: usize = 64;

/// Expansion of the log-coefficient. Beyond `j_active` the coordinates
/// are treated as inactive and contribute nothing.
#[derive(Debug, Clone, PartialEq)]
pub struct ParametricField {
    c: f64,
    theta: f64,
    j_active: usize,
}

/// Smallest truncation J for which the first neglected amplitude is below
/// `tol` times the total retained amplitude, comparing expected
/// oscillation masses term by term (the E|y_j| factors cancel).
pub fn truncation_for_tolerance(theta: f64, tol: f64) -> usize {
    let mut total = 0.0;
    let mut j = 0usize;
    loop {
        j += 1;
        total += (j as f64).powf(-theta);
        if ((j + 1) as f64).powf(-theta) < tol * total {
            return j;
        }
    }
}

impl ParametricField {
    pub fn new(c: f64, theta: f64) -> Result<Self> {
        Self::with_truncation(c, theta, DEFAULT_TRUNCATION)
    }

    pub fn with_truncation(c: f64, theta: f64, j_active: usize) -> Result<Self> {
        if !c.is_finite() || c < 0.0 {
            return Err(Error::invalid(format!("amplitude c = {c}")));
        }
        if !(theta > 1.0) {
            return Err(Error::invalid(format!(
                "decay exponent theta = {theta} must exceed 1 for a summable \
                 expansion"
            )));
        }
        if j_active == 0 {
            return Err(Error::invalid("need at least one active coordinate"));
        }
        Ok(ParametricField {
            c,
            theta,
            j_active,
        })
    }

    pub fn c(&self) -> f64 {
        self.c
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn j_active(&self) -> usize {
        self.j_active
    }

    /// Amplitude `c j^-theta` of the j-th expansion function (1-based).
    pub fn amplitude(&self, j: u32) -> f64 {
        self.c * (j as f64).powf(-self.theta)
    }

    pub fn psi(&self, j: u32, x: f64) -> f64 {
        self.amplitude(j) * (j as f64 * PI * x).sin()
    }

    /// `sum_{j <= J_a} y_j psi_j(x)`; coordinates beyond the slice read 0.
    pub fn log_coeff(&self, x: f64, y: &[f64]) -> f64 {
        let terms = self.j_active.min(y.len());
        let mut acc = 0.0;
        for (idx, &yj) in y[..terms].iter().enumerate() {
            if yj != 0.0 {
                acc += yj * self.psi(idx as u32 + 1, x);
            }
        }
        acc
    }

    pub fn coeff(&self, x: f64, y: &[f64]) -> f64 {
        self.log_coeff(x, y).exp()
    }

    /// Root mean square of the neglected part of the log-coefficient over
    /// x and y, `sqrt(sum_{j > J_a} amplitude(j)^2 / 2)`: the quantified
    /// cost of the truncation.
    pub fn truncation_rms(&self) -> f64 {
        // integral bound sandwich on the tail of sum j^(-2 theta)
        let p = 2.0 * self.theta;
        let j = self.j_active as f64;
        let tail = j.powf(1.0 - p) / (p - 1.0);
        (self.c * self.c * tail / 2.0).sqrt()
    }
}

/// Problem definition for the diffusion surrogate, loadable from TOML.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ProblemConfig {
    pub theta: f64,
    pub c: f64,
    pub r_sp: usize,
    pub n0: usize,
    #[serde(rename = "K")]
    pub max_level: u32,
    #[serde(rename = "J_a", skip_serializing_if = "Option::is_none")]
    pub j_a: Option<usize>,
    /// Constant right-hand side value.
    pub rhs: f64,
}

impl Default for ProblemConfig {
    fn default() -> Self {
        ProblemConfig {
            theta: 2.5,
            c: 0.6,
            r_sp: 1,
            n0: 1,
            max_level: 10,
            j_a: None,
            rhs: 1.0,
        }
    }
}

impl ProblemConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn hierarchy(&self) -> Result<SpatialHierarchy> {
        SpatialHierarchy::new(self.max_level, self.n0, self.r_sp)
    }

    pub fn field(&self) -> Result<ParametricField> {
        match self.j_a {
            Some(j) => ParametricField::with_truncation(self.c, self.theta, j),
            None => ParametricField::new(self.c, self.theta),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn amplitudes_decay_and_bound_the_expansion_functions() {
        let field = ParametricField::new(0.6, 2.5).unwrap();
        let mut prev = f64::INFINITY;
        for j in 1..=20u32 {
            let b = field.amplitude(j);
            assert!(b > 0.0 && b < prev);
            prev = b;
            for i in 0..50 {
                let x = i as f64 / 49.0;
                assert!(field.psi(j, x).abs() <= b + 1e-15);
            }
        }
    }

    #[test]
    fn empty_parameter_gives_the_unit_coefficient() {
        let field = ParametricField::new(0.6, 2.5).unwrap();
        for x in [0.0, 0.3, 0.75, 1.0] {
            assert_eq!(field.coeff(x, &[]), 1.0);
            assert_eq!(field.coeff(x, &[0.0, 0.0, 0.0]), 1.0);
        }
    }

    #[test]
    fn single_coordinate_reduces_to_one_expansion_function() {
        let field = ParametricField::new(0.7, 3.0).unwrap();
        let y = [0.0, 1.5, 0.0];
        for x in [0.1, 0.42, 0.9] {
            let expect = 1.5 * 0.7 * 2.0f64.powf(-3.0) * (2.0 * PI * x).sin();
            assert!((field.log_coeff(x, &y) - expect).abs() < 1e-15);
            assert!(field.coeff(x, &y) > 0.0);
        }
    }

    #[test]
    fn coordinates_beyond_the_truncation_are_inactive() {
        let field = ParametricField::with_truncation(0.6, 2.5, 3).unwrap();
        let short = [0.4, -0.2, 0.9];
        let long = [0.4, -0.2, 0.9, 5.0, -7.0];
        for x in [0.2, 0.6] {
            assert_eq!(field.log_coeff(x, &short), field.log_coeff(x, &long));
        }
    }

    #[test]
    fn tolerance_rule_matches_a_direct_search() {
        // independent brute-force scan of the same criterion
        let theta = 2.5;
        let tol = 1e-4;
        let from_rule = truncation_for_tolerance(theta, tol);
        let mut direct = None;
        let mut total = 0.0;
        for j in 1..100_000usize {
            total += (j as f64).powf(-theta);
            if ((j + 1) as f64).powf(-theta) < tol * total {
                direct = Some(j);
                break;
            }
        }
        assert_eq!(Some(from_rule), direct);
        assert!(truncation_for_tolerance(theta, 1e-6) > from_rule);
    }

    #[test]
    fn truncation_rms_shrinks_with_more_active_terms() {
        let small = ParametricField::with_truncation(0.6, 2.5, 16).unwrap();
        let big = ParametricField::with_truncation(0.6, 2.5, 256).unwrap();
        assert!(big.truncation_rms() < small.truncation_rms());
        assert!(small.truncation_rms() < 0.6 * 16.0f64.powf(-2.0));
    }

    #[test]
    fn rejects_degenerate_parameters() {
        assert!(ParametricField::new(-1.0, 2.5).is_err());
        assert!(ParametricField::new(0.6, 1.0).is_err());
        assert!(ParametricField::with_truncation(0.6, 2.5, 0).is_err());
    }

    #[test]
    fn config_round_trips_through_toml() {
        let config = ProblemConfig {
            theta: 2.0,
            c: 0.4,
            r_sp: 2,
            n0: 2,
            max_level: 8,
            j_a: Some(32),
            rhs: 1.0,
        };
        let text = config.to_toml_string().unwrap();
        let back = ProblemConfig::from_toml_str(&text).unwrap();
        assert_eq!(config, back);
    }

    #[test]
    fn config_defaults_fill_missing_keys() {
        let config = ProblemConfig::from_toml_str("theta = 3.0\nK = 6\n").unwrap();
        assert_eq!(config.theta, 3.0);
        assert_eq!(config.max_level, 6);
        assert_eq!(config.c, 0.6);
        assert_eq!(config.r_sp, 1);
        assert_eq!(config.j_a, None);
        assert!(ProblemConfig::from_toml_str("thetaa = 3.0").is_err());
        let hier = config.hierarchy().unwrap();
        assert_eq!(hier.dim(6), 63);
    }
}
