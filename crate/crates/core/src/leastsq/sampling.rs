//! Batch drawing from a [`DensitySpec`] and Monte Carlo norm estimation.
//!
//! Every point gets its own RNG stream derived from the batch seed, so
//! batches are reproducible bit for bit and points can be generated in any
//! order or in parallel without changing the result.

use std::io::{BufRead, Write};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::leastsq::density::DensitySpec;

/// Points drawn i.i.d. from a sampling density together with their
/// reciprocal-density weights.
///
/// Coordinates are stored as a dense row per point, length [`Self::dim`].
/// Positions no mixture component touches stay exactly zero; the density is
/// a constant factor in those directions, so the weights do not see them.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleBatch {
    dim: usize,
    coords: Vec<f64>,
    weights: Vec<f64>,
    components: Vec<u32>,
    seed: u64,
    spec_hash: u64,
}

impl SampleBatch {
    /// Assembles a batch from raw parts, validating the shape invariants.
    /// This is the import path; [`draw_batch`] is the normal constructor.
    pub fn from_parts(
        dim: usize,
        coords: Vec<f64>,
        weights: Vec<f64>,
        components: Vec<u32>,
        seed: u64,
        spec_hash: u64,
    ) -> Result<SampleBatch> {
        let n = weights.len();
        if n == 0 {
            return Err(Error::invalid("a sample batch cannot be empty"));
        }
        if coords.len() != n * dim || components.len() != n {
            return Err(Error::invalid(format!(
                "inconsistent batch shape: {} coordinates, {} weights, {} \
                 component ids, dim {dim}",
                coords.len(),
                n,
                components.len()
            )));
        }
        if coords.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("batch coordinates".to_string()));
        }
        if weights.iter().any(|w| !(w.is_finite() && *w > 0.0)) {
            return Err(Error::NonFinite(
                "batch weights must be positive and finite".to_string(),
            ));
        }
        Ok(SampleBatch {
            dim,
            coords,
            weights,
            components,
            seed,
            spec_hash,
        })
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.coords[i * self.dim..(i + 1) * self.dim]
    }

    /// `1 / rho(y_i)` for each point.
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Mixture component that produced each point, basis components first.
    pub fn components(&self) -> &[u32] {
        &self.components
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Fingerprint of the generating spec; zero for imported batches whose
    /// provenance the CSV format does not carry.
    pub fn spec_hash(&self) -> u64 {
        self.spec_hash
    }

    /// Writes `seed,component,y1..y<dim>,weight` rows. Floats are printed in
    /// shortest round-trip form, so a read-back reproduces them bit for bit.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        write!(w, "seed,component")?;
        for j in 1..=self.dim {
            write!(w, ",y{j}")?;
        }
        writeln!(w, ",weight")?;
        for i in 0..self.len() {
            write!(w, "{},{}", self.seed, self.components[i])?;
            for v in self.point(i) {
                write!(w, ",{v}")?;
            }
            writeln!(w, ",{}", self.weights[i])?;
        }
        Ok(())
    }

    /// Reads a batch written by [`Self::write_csv`]. The spec hash is not
    /// part of the format and comes back as zero.
    pub fn read_csv<R: BufRead>(r: R) -> Result<SampleBatch> {
        let mut lines = r.lines();
        let header = lines
            .next()
            .ok_or_else(|| Error::invalid("empty batch file"))??;
        let cols: Vec<&str> = header.trim().split(',').collect();
        if cols.len() < 3 || cols[0] != "seed" || cols[1] != "component" {
            return Err(Error::invalid(format!("unrecognized header {header:?}")));
        }
        if cols[cols.len() - 1] != "weight" {
            return Err(Error::invalid("last column must be the weight"));
        }
        let dim = cols.len() - 3;
        for (j, name) in cols[2..2 + dim].iter().enumerate() {
            if *name != format!("y{}", j + 1) {
                return Err(Error::invalid(format!(
                    "coordinate column {} is named {name:?}",
                    j + 1
                )));
            }
        }
        let mut coords = Vec::new();
        let mut weights = Vec::new();
        let mut components = Vec::new();
        let mut seed: Option<u64> = None;
        for line in lines {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.trim().split(',').collect();
            if fields.len() != cols.len() {
                return Err(Error::invalid(format!(
                    "row has {} fields, header has {}",
                    fields.len(),
                    cols.len()
                )));
            }
            let row_seed: u64 = parse(fields[0])?;
            match seed {
                None => seed = Some(row_seed),
                Some(s) if s != row_seed => {
                    return Err(Error::invalid("rows disagree on the seed"));
                }
                _ => {}
            }
            components.push(parse(fields[1])?);
            for f in &fields[2..2 + dim] {
                coords.push(parse(f)?);
            }
            weights.push(parse(fields[2 + dim])?);
        }
        let seed = seed.ok_or_else(|| Error::invalid("batch file has no rows"))?;
        SampleBatch::from_parts(dim, coords, weights, components, seed, 0)
    }
}

fn parse<T: std::str::FromStr>(field: &str) -> Result<T> {
    field
        .parse()
        .map_err(|_| Error::invalid(format!("unparseable field {field:?}")))
}

/// Standard normal draw by the Box-Muller map; two uniforms in, the cosine
/// branch out.
fn gauss(rng: &mut ChaCha8Rng) -> f64 {
    let u1: f64 = 1.0 - rng.gen::<f64>();
    let u2: f64 = rng.gen();
    (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}

/// Draws `n` i.i.d. points from the mixture density.
///
/// Per point: pick a component by its mass, then fill every active
/// coordinate, by CDF inversion where the component carries a nonzero
/// degree and by a plain Gaussian draw where it does not. The weight is the
/// reciprocal of the density at the drawn point, so `w * rho(y)` is exactly
/// one by construction.
pub fn draw_batch(spec: &DensitySpec, n: usize, seed: u64) -> SampleBatch {
    assert!(n >= 1, "draw_batch needs at least one point");
    let dim = spec.dim();
    let active: Vec<u32> = spec.active_coords().collect();
    let mut coords = vec![0.0; n * dim];
    let mut weights = Vec::with_capacity(n);
    let mut components = Vec::with_capacity(n);
    for i in 0..n {
        // independent stream per point keeps the batch order-insensitive
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(1 + i as u64);
        let c = spec.pick_component(rng.gen::<f64>());
        let s = spec.component_index(c);
        let row = &mut coords[i * dim..(i + 1) * dim];
        for &j in &active {
            let t = s.get(j);
            row[j as usize - 1] = if t == 0 {
                gauss(&mut rng)
            } else {
                spec.invert_coordinate(t, rng.gen::<f64>())
            };
        }
        let rho = spec.density(row);
        let w = 1.0 / rho;
        assert!(
            w.is_finite() && w > 0.0,
            "weight {w} from density {rho} at point {i}"
        );
        weights.push(w);
        components.push(c as u32);
    }
    SampleBatch {
        dim,
        coords,
        weights,
        components,
        seed,
        spec_hash: spec.fingerprint(),
    }
}

/// Monte Carlo estimate of a Gaussian `L2` norm with its jackknife standard
/// error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct L2Estimate {
    pub value: f64,
    pub std_error: f64,
}

/// Estimates `sqrt(E[d(y)])` for `y` standard Gaussian in `dim` coordinates,
/// where `d` returns the squared pointwise deviation. The standard error is
/// the leave-one-out jackknife of the square-root estimator.
pub fn estimate_l2_error_with<D>(dim: usize, mut sq_diff: D, n_mc: usize, seed: u64) -> L2Estimate
where
    D: FnMut(&[f64]) -> f64,
{
    assert!(n_mc >= 1, "at least one Monte Carlo point");
    let mut devs = Vec::with_capacity(n_mc);
    let mut y = vec![0.0; dim];
    let mut total = 0.0;
    for i in 0..n_mc {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(1 + i as u64);
        for slot in y.iter_mut() {
            *slot = gauss(&mut rng);
        }
        let d = sq_diff(&y);
        assert!(d.is_finite() && d >= 0.0, "squared deviation {d}");
        devs.push(d);
        total += d;
    }
    let n = n_mc as f64;
    let value = (total / n).sqrt();
    if n_mc == 1 {
        return L2Estimate {
            value,
            std_error: 0.0,
        };
    }
    // jackknife over leave-one-out square roots
    let mut loo = Vec::with_capacity(n_mc);
    let mut mean = 0.0;
    for &d in &devs {
        let v = ((total - d).max(0.0) / (n - 1.0)).sqrt();
        loo.push(v);
        mean += v;
    }
    mean /= n;
    let ss: f64 = loo.iter().map(|v| (v - mean) * (v - mean)).sum();
    L2Estimate {
        value,
        std_error: ((n - 1.0) / n * ss).sqrt(),
    }
}

/// [`estimate_l2_error_with`] for two scalar functions: the squared
/// deviation is `(approx(y) - reference(y))^2`.
pub fn estimate_l2_error<A, R>(
    dim: usize,
    mut approx: A,
    mut reference: R,
    n_mc: usize,
    seed: u64,
) -> L2Estimate
where
    A: FnMut(&[f64]) -> f64,
    R: FnMut(&[f64]) -> f64,
{
    estimate_l2_error_with(
        dim,
        |y| {
            let d = approx(y) - reference(y);
            d * d
        },
        n_mc,
        seed,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::leastsq::density::{build_density, christoffel_density};
    use crate::multiindex::dyadic_rho_ws;
    use crate::multiindex::{sigma_ordered_prefix, MultiIndex};

    fn spec_for(m: usize, s_max: usize) -> DensitySpec {
        let ws = dyadic_rho_ws(3);
        let basis = sigma_ordered_prefix(&ws, m, 4096).unwrap();
        build_density(&ws, &basis, s_max).unwrap()
    }

    #[test]
    fn batches_are_bit_identical_per_seed() {
        let spec = spec_for(3, 24);
        let a = draw_batch(&spec, 200, 7);
        let b = draw_batch(&spec, 200, 7);
        assert_eq!(a, b);
        let c = draw_batch(&spec, 200, 8);
        assert_ne!(a, c);
        assert_eq!(a.spec_hash(), spec.fingerprint());
    }

    #[test]
    fn longer_batches_extend_shorter_ones() {
        // per-point streams make the first points independent of the batch
        // size, which is what makes parallel generation well defined
        let spec = spec_for(3, 24);
        let short = draw_batch(&spec, 50, 11);
        let long = draw_batch(&spec, 200, 11);
        for i in 0..50 {
            assert_eq!(short.point(i), long.point(i));
            assert_eq!(short.weights()[i], long.weights()[i]);
        }
    }

    #[test]
    fn weights_are_exact_density_reciprocals() {
        let spec = spec_for(4, 32);
        let batch = draw_batch(&spec, 1000, 3);
        for i in 0..batch.len() {
            let w = batch.weights()[i];
            let rho = spec.density(batch.point(i));
            assert_eq!(w.to_bits(), (1.0 / rho).to_bits(), "point {i}");
        }
    }

    #[test]
    fn gamma_coordinates_of_the_constant_component_center_on_zero() {
        // the all-zero component draws every active coordinate from the
        // plain Gaussian; check its first coordinate over many points
        let spec = spec_for(1, 8);
        assert!(spec.component_index(0).is_zero());
        let batch = draw_batch(&spec, 100_000, 21);
        let mut vals = Vec::new();
        for i in 0..batch.len() {
            if batch.components()[i] == 0 {
                vals.push(batch.point(i)[0]);
            }
        }
        assert!(vals.len() > 40_000, "component 0 holds half the mass");
        let n = vals.len() as f64;
        let mean: f64 = vals.iter().sum::<f64>() / n;
        let var: f64 = vals.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
        let se = (var / n).sqrt();
        assert!(mean.abs() < 4.0 * se, "mean {mean}, se {se}");
        // and the variance itself is 1 to a loose Monte Carlo tolerance
        assert!((var - 1.0).abs() < 0.05, "variance {var}");
    }

    #[test]
    fn histogram_tracks_the_density_in_one_dimension() {
        // pure 1-D three-term Christoffel density, binned against its exact
        // per-bin mass from composite Simpson quadrature
        let basis = vec![
            MultiIndex::zero(),
            MultiIndex::unit(1),
            MultiIndex::from_pairs([(1, 2)]).unwrap(),
        ];
        let spec = christoffel_density(&basis).unwrap();
        assert_eq!(spec.dim(), 1);
        let n = 1_000_000usize;
        let batch = draw_batch(&spec, n, 5);
        let (lo, hi, bins) = (-8.0f64, 8.0f64, 100usize);
        let width = (hi - lo) / bins as f64;
        let mut counts = vec![0u64; bins];
        let mut outside = 0u64;
        for i in 0..n {
            let y = batch.point(i)[0];
            if y < lo || y >= hi {
                outside += 1;
            } else {
                counts[((y - lo) / width) as usize] += 1;
            }
        }
        let norm = 1.0 / (2.0 * std::f64::consts::PI).sqrt();
        let pdf = |y: f64| spec.density(&[y]) * (-0.5 * y * y).exp() * norm;
        let mut l1 = 0.0;
        let mut mass_seen = 0.0;
        for (b, &count) in counts.iter().enumerate() {
            let a = lo + b as f64 * width;
            // Simpson on each bin is plenty at this width
            let exact = width / 6.0 * (pdf(a) + 4.0 * pdf(a + 0.5 * width) + pdf(a + width));
            mass_seen += exact;
            l1 += (count as f64 / n as f64 - exact).abs();
        }
        l1 += outside as f64 / n as f64 + (1.0 - mass_seen).max(0.0);
        assert!(l1 < 0.01, "histogram L1 distance {l1}");
    }

    #[test]
    fn marginal_histogram_of_a_mixed_spec_tracks_the_component_sum() {
        // first-coordinate marginal of the full mixture: other coordinates
        // integrate out of each tensor component, leaving the mass-weighted
        // univariate component densities
        let spec = spec_for(3, 24);
        let n = 300_000usize;
        let batch = draw_batch(&spec, n, 17);
        let (lo, hi, bins) = (-8.0f64, 8.0f64, 80usize);
        let width = (hi - lo) / bins as f64;
        let mut counts = vec![0u64; bins];
        let mut outside = 0u64;
        for i in 0..n {
            let y = batch.point(i)[0];
            if y < lo || y >= hi {
                outside += 1;
            } else {
                counts[((y - lo) / width) as usize] += 1;
            }
        }
        let norm = 1.0 / (2.0 * std::f64::consts::PI).sqrt();
        let marginal = |y: f64| {
            let mut acc = 0.0;
            for c in 0..spec.component_count() {
                let t = spec.component_index(c).get(1);
                let h = crate::hermite::hermite_eval(t, y);
                acc += spec.component_mass(c) * h * h;
            }
            acc * (-0.5 * y * y).exp() * norm
        };
        let mut l1 = 0.0;
        let mut mass_seen = 0.0;
        for (b, &count) in counts.iter().enumerate() {
            let a = lo + b as f64 * width;
            let exact =
                width / 6.0 * (marginal(a) + 4.0 * marginal(a + 0.5 * width) + marginal(a + width));
            mass_seen += exact;
            l1 += (count as f64 / n as f64 - exact).abs();
        }
        l1 += outside as f64 / n as f64 + (1.0 - mass_seen).max(0.0);
        assert!(l1 < 0.02, "marginal L1 distance {l1}");
    }

    #[test]
    fn csv_round_trip_preserves_everything_but_the_hash() {
        let spec = spec_for(3, 24);
        let batch = draw_batch(&spec, 77, 42);
        let mut buf = Vec::new();
        batch.write_csv(&mut buf).unwrap();
        let back = SampleBatch::read_csv(buf.as_slice()).unwrap();
        assert_eq!(back.dim(), batch.dim());
        assert_eq!(back.seed(), batch.seed());
        assert_eq!(back.components(), batch.components());
        assert_eq!(back.weights(), batch.weights());
        for i in 0..batch.len() {
            assert_eq!(back.point(i), batch.point(i));
        }
        assert_eq!(back.spec_hash(), 0);
    }

    #[test]
    fn csv_rejects_malformed_input() {
        assert!(SampleBatch::read_csv("".as_bytes()).is_err());
        assert!(SampleBatch::read_csv("seed,component,weight\n".as_bytes()).is_err());
        let mixed = "seed,component,y1,weight\n1,0,0.5,1.0\n2,0,0.5,1.0\n";
        assert!(SampleBatch::read_csv(mixed.as_bytes()).is_err());
        let bad_cols = "seed,component,z1,weight\n1,0,0.5,1.0\n";
        assert!(SampleBatch::read_csv(bad_cols.as_bytes()).is_err());
    }

    #[test]
    fn from_parts_validates_shapes_and_values() {
        assert!(SampleBatch::from_parts(1, vec![], vec![], vec![], 0, 0).is_err());
        assert!(SampleBatch::from_parts(1, vec![0.0], vec![1.0, 2.0], vec![0], 0, 0).is_err());
        assert!(SampleBatch::from_parts(1, vec![f64::NAN], vec![1.0], vec![0], 0, 0).is_err());
        assert!(SampleBatch::from_parts(1, vec![0.0], vec![-1.0], vec![0], 0, 0).is_err());
        assert!(SampleBatch::from_parts(1, vec![0.0], vec![1.0], vec![0], 0, 0).is_ok());
    }

    #[test]
    fn error_estimate_trivial_cases() {
        let same = estimate_l2_error(2, |y| y[0] + y[1], |y| y[0] + y[1], 500, 1);
        assert_eq!(same.value, 0.0);
        assert_eq!(same.std_error, 0.0);
        let consts = estimate_l2_error(1, |_| 2.5, |_| -0.5, 500, 1);
        assert!((consts.value - 3.0).abs() < 1e-12);
        assert!(consts.std_error < 1e-12);
    }

    #[test]
    fn error_estimate_matches_the_gaussian_second_moment() {
        // || y_1 - 0 || over gamma is exactly 1
        let est = estimate_l2_error(1, |y| y[0], |_| 0.0, 100_000, 9);
        assert!(est.std_error > 0.0);
        assert!(
            (est.value - 1.0).abs() < 3.0 * est.std_error,
            "estimate {} with se {}",
            est.value,
            est.std_error
        );
    }
}
