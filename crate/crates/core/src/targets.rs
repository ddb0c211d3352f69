//! Benchmark target functions, uniform sampling and additive noise.

use std::io::{BufRead, Write};

use ndarray::Array2;
use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::legendre::ExpansionCoefficients;
use crate::multiindex::{MultiIndex, MultiIndexSet};
use crate::rng::{stream_rng, Stream};

/// Serializable description of a target.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case")]
pub enum TargetSpec {
    /// `log(sin(10Kx) + 2) + sin(Kx)` on `[-1, 1]`.
    Logsin { k: u32 },
    /// `exp(−(cos x₁ + … + cos x_d)/(8d))`.
    ExpCos { d: usize },
    /// `(∏_{k≤⌈d/2⌉}(1 + 4^k x_k²) / ∏_{k>⌈d/2⌉}(100 + 5x_k))^{1/d}`.
    Rational { d: usize },
    /// Indicator of `x₁ + … + x_d ≥ 0`.
    Halfspace { d: usize },
    /// A finite Legendre expansion given as `(label, coefficient)` pairs.
    Polynomial { d: usize, terms: Vec<(String, f64)> },
}

#[derive(Debug, Clone)]
pub struct TargetFunction {
    spec: TargetSpec,
    poly: Option<ExpansionCoefficients>,
}

pub fn logsin(k: u32) -> TargetFunction {
    TargetFunction { spec: TargetSpec::Logsin { k }, poly: None }
}

pub fn exp_cos(d: usize) -> TargetFunction {
    TargetFunction { spec: TargetSpec::ExpCos { d }, poly: None }
}

pub fn rational(d: usize) -> TargetFunction {
    TargetFunction { spec: TargetSpec::Rational { d }, poly: None }
}

pub fn halfspace(d: usize) -> TargetFunction {
    TargetFunction { spec: TargetSpec::Halfspace { d }, poly: None }
}

/// The Legendre expansion `Σ c_ν Ψ_ν` as a target.
pub fn polynomial(coeffs: &ExpansionCoefficients) -> TargetFunction {
    let d = coeffs.index_set().dim();
    let terms = coeffs.index_set().iter().zip(coeffs.values()).filter(|(_, c)| **c != 0.0).map(|(nu, c)| (nu.label(), *c)).collect();
    TargetFunction { spec: TargetSpec::Polynomial { d, terms }, poly: Some(coeffs.clone()) }
}

impl TargetFunction {
    pub fn from_spec(spec: TargetSpec) -> Result<Self> {
        let dim_ok = |d: usize| if d == 0 { Err(Error::invalid("target dimension must be positive")) } else { Ok(()) };
        match &spec {
            TargetSpec::Logsin { k } => {
                if *k == 0 {
                    return Err(Error::invalid("logsin needs K >= 1"));
                }
            }
            TargetSpec::ExpCos { d } | TargetSpec::Rational { d } | TargetSpec::Halfspace { d } => dim_ok(*d)?,
            TargetSpec::Polynomial { d, terms } => {
                dim_ok(*d)?;
                let mut indices = Vec::with_capacity(terms.len());
                for (label, _) in terms {
                    let nu = MultiIndex::parse_label(label)?;
                    if nu.dim() != *d {
                        return Err(Error::DimensionMismatch { expected: *d, found: nu.dim() });
                    }
                    indices.push(nu);
                }
                let set = MultiIndexSet::new(*d, indices)?;
                if set.len() != terms.len() {
                    return Err(Error::invalid("repeated multi-index in polynomial target"));
                }
                let mut values = ndarray::Array1::zeros(set.len());
                for (label, c) in terms {
                    let pos = set.position(&MultiIndex::parse_label(label)?).expect("present");
                    values[pos] = *c;
                }
                let poly = ExpansionCoefficients::new(set, values)?;
                return Ok(TargetFunction { spec, poly: Some(poly) });
            }
        }
        Ok(TargetFunction { spec, poly: None })
    }

    pub fn spec(&self) -> &TargetSpec {
        &self.spec
    }

    pub fn name(&self) -> &'static str {
        match self.spec {
            TargetSpec::Logsin { .. } => "logsin",
            TargetSpec::ExpCos { .. } => "exp_cos",
            TargetSpec::Rational { .. } => "rational",
            TargetSpec::Halfspace { .. } => "halfspace",
            TargetSpec::Polynomial { .. } => "polynomial",
        }
    }

    pub fn dim(&self) -> usize {
        match self.spec {
            TargetSpec::Logsin { .. } => 1,
            TargetSpec::ExpCos { d } | TargetSpec::Rational { d } | TargetSpec::Halfspace { d } | TargetSpec::Polynomial { d, .. } => d,
        }
    }

    /// True for targets whose sparse-grid test error is unreliable.
    pub fn is_discontinuous(&self) -> bool {
        matches!(self.spec, TargetSpec::Halfspace { .. })
    }

    /// Evaluates at `x`, which must have length `dim()`.
    pub fn eval(&self, x: &[f64]) -> f64 {
        debug_assert_eq!(x.len(), self.dim());
        match self.spec {
            TargetSpec::Logsin { k } => {
                let k = k as f64;
                ((10.0 * k * x[0]).sin() + 2.0).ln() + (k * x[0]).sin()
            }
            TargetSpec::ExpCos { d } => {
                let s: f64 = x.iter().map(|v| v.cos()).sum();
                (-s / (8.0 * d as f64)).exp()
            }
            TargetSpec::Rational { d } => {
                let half = d.div_ceil(2);
                let mut num = 1.0;
                for (k, v) in x[..half].iter().enumerate() {
                    num *= 1.0 + 4f64.powi(k as i32 + 1) * v * v;
                }
                let den: f64 = x[half..].iter().map(|v| 100.0 + 5.0 * v).product();
                (num / den).powf(1.0 / d as f64)
            }
            TargetSpec::Halfspace { .. } => {
                if x.iter().sum::<f64>() >= 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            TargetSpec::Polynomial { .. } => self.poly.as_ref().expect("polynomial coefficients").eval(x).unwrap_or(f64::NAN),
        }
    }

    pub fn eval_points(&self, points: &Array2<f64>) -> Result<Vec<f64>> {
        if points.ncols() != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), found: points.ncols() });
        }
        Ok(points.rows().into_iter().map(|r| self.eval(&r.to_vec())).collect())
    }
}

/// `m` i.i.d. uniform points in the open cube `(-1, 1)^d`, one per row.
pub fn sample_uniform(d: usize, m: usize, seed: u64) -> Array2<f64> {
    let mut rng = stream_rng(seed, Stream::Sample, &[]);
    Array2::from_shape_simple_fn((m, d), || loop {
        let v = 2.0 * rng.random::<f64>() - 1.0;
        if v > -1.0 {
            break v;
        }
    })
}

/// Adds independent `N(0, σ²)` noise.
pub fn add_noise(values: &[f64], sigma: f64, seed: u64) -> Result<Vec<f64>> {
    if !(sigma >= 0.0) || !sigma.is_finite() {
        return Err(Error::invalid(format!("noise level must be finite and nonnegative, got {sigma}")));
    }
    if sigma == 0.0 {
        return Ok(values.to_vec());
    }
    let normal = Normal::new(0.0, sigma).map_err(|e| Error::invalid(e.to_string()))?;
    let mut rng = stream_rng(seed, Stream::Noise, &[]);
    Ok(values.iter().map(|v| v + normal.sample(&mut rng)).collect())
}

/// Noise levels used by the benchmark presets.
pub const NOISE_PRESETS: [f64; 3] = [1e-1, 1e-2, 1e-3];

/// Training samples of a target.
#[derive(Debug, Clone, PartialEq)]
pub struct DataSet {
    pub name: String,
    pub points: Array2<f64>,
    pub values: Vec<f64>,
    pub noise_sigma: f64,
    pub seed: u64,
}

impl DataSet {
    /// Samples `m` points with `seed` and evaluates `target`, with noise drawn
    /// from a stream of the same seed.
    pub fn generate(target: &TargetFunction, m: usize, noise_sigma: f64, seed: u64) -> Result<Self> {
        let points = sample_uniform(target.dim(), m, seed);
        let clean = target.eval_points(&points)?;
        let values = add_noise(&clean, noise_sigma, seed)?;
        Ok(DataSet { name: target.name().to_string(), points, values, noise_sigma, seed })
    }

    pub fn new(name: impl Into<String>, points: Array2<f64>, values: Vec<f64>, noise_sigma: f64, seed: u64) -> Result<Self> {
        if points.nrows() != values.len() {
            return Err(Error::DimensionMismatch { expected: points.nrows(), found: values.len() });
        }
        if points.iter().any(|v| !(v.abs() <= 1.0)) {
            return Err(Error::invalid("data points must lie in [-1, 1]^d"));
        }
        Ok(DataSet { name: name.into(), points, values, noise_sigma, seed })
    }

    pub fn dim(&self) -> usize {
        self.points.ncols()
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "# name={} d={} sigma={:.16e} seed={}", self.name, self.dim(), self.noise_sigma, self.seed)?;
        let mut header: Vec<String> = (1..=self.dim()).map(|j| format!("x{j}")).collect();
        header.push("value".into());
        writeln!(w, "{}", header.join(","))?;
        for (row, v) in self.points.rows().into_iter().zip(&self.values) {
            let mut cells: Vec<String> = row.iter().map(|x| format!("{x:.16e}")).collect();
            cells.push(format!("{v:.16e}"));
            writeln!(w, "{}", cells.join(","))?;
        }
        Ok(())
    }

    pub fn read_csv<R: BufRead>(r: R) -> Result<Self> {
        let mut lines = r.lines();
        let meta = lines.next().ok_or_else(|| Error::Parse("empty data file".into()))??;
        let meta = meta.strip_prefix("# ").ok_or_else(|| Error::Parse("missing metadata line".into()))?;
        let (mut name, mut d, mut sigma, mut seed) = (None, None, None, None);
        for field in meta.split_whitespace() {
            let (key, val) = field.split_once('=').ok_or_else(|| Error::Parse(format!("bad metadata field {field:?}")))?;
            let bad = |_| Error::Parse(format!("bad value for {key}"));
            match key {
                "name" => name = Some(val.to_string()),
                "d" => d = Some(val.parse::<usize>().map_err(|e| bad(e.to_string()))?),
                "sigma" => sigma = Some(val.parse::<f64>().map_err(|e| bad(e.to_string()))?),
                "seed" => seed = Some(val.parse::<u64>().map_err(|e| bad(e.to_string()))?),
                _ => {}
            }
        }
        let d = d.ok_or_else(|| Error::Parse("metadata lacks d".into()))?;
        lines.next().ok_or_else(|| Error::Parse("missing column header".into()))??;
        let mut coords = Vec::new();
        let mut values = Vec::new();
        for line in lines {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let cells: Vec<f64> = line
                .split(',')
                .map(|c| c.trim().parse::<f64>().map_err(|e| Error::Parse(format!("{c:?}: {e}"))))
                .collect::<Result<_>>()?;
            if cells.len() != d + 1 {
                return Err(Error::DimensionMismatch { expected: d + 1, found: cells.len() });
            }
            coords.extend_from_slice(&cells[..d]);
            values.push(cells[d]);
        }
        let points = Array2::from_shape_vec((values.len(), d), coords).map_err(|e| Error::Parse(e.to_string()))?;
        DataSet::new(name.unwrap_or_default(), points, values, sigma.unwrap_or(0.0), seed.unwrap_or(0))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quadrature::{integrate, qmc_rule, reference_coefficients, smolyak_rule};
    use crate::multiindex::hyperbolic_cross;
    use proptest::prelude::*;
    #[allow(unused_imports)]
    use rand::Rng;

    #[test]
    fn logsin_values() {
        assert!((logsin(1).eval(&[0.0]) - std::f64::consts::LN_2).abs() < 1e-15);
        for k in [2, 3, 7] {
            assert_eq!(logsin(k).eval(&[0.0]), std::f64::consts::LN_2);
        }
        // independent evaluation at x = 0.3
        let expect = (3f64.sin() + 2.0).ln() + 0.3f64.sin();
        assert_eq!(logsin(1).eval(&[0.3]), expect);
    }

    #[test]
    fn exp_cos_values() {
        let f = exp_cos(8);
        assert!((f.eval(&[0.0; 8]) - 0.882_496_902_584_595_4).abs() < 1e-15);
        let x = [0.3, -0.9, 0.1, 0.7];
        let y = [0.7, 0.1, 0.3, -0.9];
        assert!((exp_cos(4).eval(&x) - exp_cos(4).eval(&y)).abs() < 1e-15);
    }

    #[test]
    fn rational_values() {
        let f = rational(8);
        assert!((f.eval(&[0.0; 8]) - 0.1).abs() < 1e-15);
        let mut x = [0.0; 8];
        x[7] = -1.0;
        let expect = (1.0 / (100f64.powi(3) * 95.0)).powf(0.125);
        assert!((f.eval(&x) - expect).abs() < 1e-15);
        // odd d keeps ⌈d/2⌉ factors in the numerator
        let g = rational(3);
        let expect = ((1.0 + 4.0 * 0.25) * (1.0 + 16.0 * 0.25) / (100.0 + 5.0 * 0.5f64)).powf(1.0 / 3.0);
        assert!((g.eval(&[0.5, 0.5, 0.5]) - expect).abs() < 1e-14);
    }

    #[test]
    fn halfspace_values() {
        let f = halfspace(2);
        assert_eq!(f.eval(&[0.5, -0.2]), 1.0);
        assert_eq!(f.eval(&[-0.5, 0.2]), 0.0);
        for d in [1, 2, 4] {
            let r = qmc_rule(d, 100_000).unwrap();
            assert!((integrate(&r, |x| halfspace(d).eval(x)) - 0.5).abs() < 1e-3, "d={d}");
        }
    }

    #[test]
    fn smooth_targets_have_stable_coefficients() {
        let set = hyperbolic_cross(2, 12).unwrap();
        for f in [exp_cos(2), rational(2)] {
            let a = reference_coefficients(&smolyak_rule(2, 9).unwrap(), |x| f.eval(x), &set).unwrap();
            let b = reference_coefficients(&smolyak_rule(2, 10).unwrap(), |x| f.eval(x), &set).unwrap();
            let diff = (a.values() - b.values()).iter().fold(0.0f64, |m, v| m.max(v.abs()));
            assert!(diff < 1e-8, "{}: {diff}", f.name());
        }
    }

    #[test]
    fn sampling_is_reproducible_and_open() {
        let a = sample_uniform(3, 1000, 9);
        assert_eq!(a, sample_uniform(3, 1000, 9));
        assert_ne!(a, sample_uniform(3, 1000, 10));
        let big = sample_uniform(2, 100_000, 1);
        assert!(big.iter().all(|v| v.abs() < 1.0));
        for col in big.columns() {
            assert!(col.mean().unwrap().abs() < 0.01);
        }
    }

    #[test]
    fn noise_statistics() {
        let zeros = vec![0.0; 100_000];
        assert_eq!(add_noise(&zeros[..10], 0.0, 3).unwrap(), zeros[..10].to_vec());
        let noisy = add_noise(&zeros, 1e-2, 3).unwrap();
        let var = noisy.iter().map(|v| v * v).sum::<f64>() / noisy.len() as f64;
        assert!((var.sqrt() / 1e-2 - 1.0).abs() < 0.05);
        assert_eq!(noisy, add_noise(&zeros, 1e-2, 3).unwrap());
        assert!(add_noise(&zeros, -1.0, 3).is_err());
    }

    #[test]
    fn dataset_round_trip() {
        let ds = DataSet::generate(&exp_cos(3), 25, 1e-3, 4).unwrap();
        let mut buf = Vec::new();
        ds.write_csv(&mut buf).unwrap();
        let back = DataSet::read_csv(buf.as_slice()).unwrap();
        assert_eq!(back, ds);
    }

    #[test]
    fn spec_round_trip() {
        let set = hyperbolic_cross(2, 3).unwrap();
        let c = ExpansionCoefficients::new(set.clone(), ndarray::Array1::from_iter((0..set.len()).map(|i| i as f64 + 0.5))).unwrap();
        for t in [logsin(2), exp_cos(4), rational(8), halfspace(2), polynomial(&c)] {
            let json = serde_json::to_string(t.spec()).unwrap();
            let back = TargetFunction::from_spec(serde_json::from_str(&json).unwrap()).unwrap();
            let x = vec![0.25; t.dim()];
            assert_eq!(back.eval(&x), t.eval(&x));
        }
    }

    proptest! {
        #[test]
        fn halfspace_permutation_invariant(x in proptest::collection::vec(-1.0f64..1.0, 4), r in 0usize..4) {
            let mut y = x.clone();
            y.rotate_left(r);
            prop_assert_eq!(halfspace(4).eval(&x), halfspace(4).eval(&y));
        }

        #[test]
        fn exp_cos_bounds(x in proptest::collection::vec(-1.0f64..1.0, 3)) {
            let v = exp_cos(3).eval(&x);
            prop_assert!(v >= (-0.125f64).exp() && v <= 0.125f64.exp());
        }
    }
}
