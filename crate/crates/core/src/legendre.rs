//! Orthonormal Legendre polynomials on `[-1, 1]^d` with respect to the
//! uniform probability measure, expansions, and the normalized measurement
//! system `A = (Ψ_ν(x_i)/√m)`, `f = (f(x_i)/√m)`.

use std::io::{BufRead, Write};

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::multiindex::{MultiIndex, MultiIndexSet};

fn check_domain(x: f64) -> Result<()> {
    if x.abs() <= 1.0 {
        Ok(())
    } else {
        Err(Error::Domain { value: x })
    }
}

/// Fills `out[k] = ψ_k(x)` for `k = 0..out.len()` using the three-term
/// recurrence for `P_k`, then scales by `√(2k+1)`. No domain check.
pub(crate) fn fill_table(x: f64, out: &mut [f64]) {
    if out.is_empty() {
        return;
    }
    let (mut p_prev, mut p) = (1.0, x);
    out[0] = 1.0;
    for k in 1..out.len() {
        if k > 1 {
            let kf = (k - 1) as f64;
            let next = ((2.0 * kf + 1.0) * x * p - kf * p_prev) / (kf + 1.0);
            p_prev = p;
            p = next;
        }
        out[k] = p * (2.0 * k as f64 + 1.0).sqrt();
    }
}

/// Orthonormal univariate Legendre polynomial `ψ_ν(x) = √(2ν+1) P_ν(x)`.
pub fn legendre_1d(nu: u32, x: f64) -> Result<f64> {
    check_domain(x)?;
    let mut table = vec![0.0; nu as usize + 1];
    fill_table(x, &mut table);
    Ok(table[nu as usize])
}

/// Tensor polynomial `Ψ_ν(x) = ∏ ψ_{ν_j}(x_j)`.
pub fn tensor_eval(nu: &MultiIndex, x: &[f64]) -> Result<f64> {
    if nu.dim() != x.len() {
        return Err(Error::DimensionMismatch { expected: nu.dim(), found: x.len() });
    }
    nu.entries().iter().zip(x).try_fold(1.0, |acc, (&k, &xj)| Ok(acc * legendre_1d(k, xj)?))
}

/// Evaluates every basis function of `set` at one point into `row`, scaled by `scale`.
pub(crate) struct BasisEvaluator {
    max_deg: Vec<usize>,
    columns: Vec<Vec<(usize, usize)>>,
}

impl BasisEvaluator {
    pub(crate) fn new(set: &MultiIndexSet) -> Self {
        let d = set.dim();
        let max_deg = (0..d).map(|j| set.max_degree(j) as usize).collect();
        // for each index, store (coordinate, degree) pairs with nonzero degree
        let columns = set
            .iter()
            .map(|nu| {
                nu.entries()
                    .iter()
                    .enumerate()
                    .filter(|(_, &k)| k > 0)
                    .map(|(j, &k)| (j, k as usize))
                    .collect()
            })
            .collect();
        BasisEvaluator { max_deg, columns }
    }

    pub(crate) fn tables(&self, x: ArrayView1<f64>) -> Vec<Vec<f64>> {
        self.max_deg
            .iter()
            .zip(x.iter())
            .map(|(&deg, &xj)| {
                let mut t = vec![0.0; deg + 1];
                fill_table(xj, &mut t);
                t
            })
            .collect()
    }

    pub(crate) fn fill_row(&self, x: ArrayView1<f64>, scale: f64, row: &mut [f64]) {
        let tables = self.tables(x);
        for (out, factors) in row.iter_mut().zip(&self.columns) {
            *out = factors.iter().fold(scale, |acc, &(j, k)| acc * tables[j][k]);
        }
    }
}

fn check_points(points: ArrayView2<f64>, dim: usize) -> Result<()> {
    if points.ncols() != dim {
        return Err(Error::DimensionMismatch { expected: dim, found: points.ncols() });
    }
    if let Some(&bad) = points.iter().find(|v| !(v.abs() <= 1.0)) {
        return Err(Error::Domain { value: bad });
    }
    Ok(())
}

/// Matrix of basis values `Ψ_ν(x_i) · scale`, rows by point, columns in
/// canonical index order.
pub fn basis_matrix(points: ArrayView2<f64>, set: &MultiIndexSet, scale: f64) -> Result<Array2<f64>> {
    check_points(points, set.dim())?;
    let eval = BasisEvaluator::new(set);
    let mut mat = Array2::<f64>::zeros((points.nrows(), set.len()));
    let n = set.len();
    if n == 0 {
        return Ok(mat);
    }
    mat.as_slice_mut()
        .expect("standard layout")
        .par_chunks_mut(n)
        .enumerate()
        .for_each(|(i, row)| eval.fill_row(points.row(i), scale, row));
    Ok(mat)
}

/// Coefficients `c_ν` aligned with an index set.
#[derive(Debug, Clone, PartialEq)]
pub struct ExpansionCoefficients {
    index_set: MultiIndexSet,
    values: Array1<f64>,
}

impl ExpansionCoefficients {
    pub fn new(index_set: MultiIndexSet, values: Array1<f64>) -> Result<Self> {
        if values.len() != index_set.len() {
            return Err(Error::DimensionMismatch { expected: index_set.len(), found: values.len() });
        }
        Ok(ExpansionCoefficients { index_set, values })
    }

    pub fn zeros(index_set: &MultiIndexSet) -> Self {
        ExpansionCoefficients { index_set: index_set.clone(), values: Array1::zeros(index_set.len()) }
    }

    pub fn index_set(&self) -> &MultiIndexSet {
        &self.index_set
    }

    pub fn values(&self) -> &Array1<f64> {
        &self.values
    }

    pub fn get(&self, nu: &MultiIndex) -> Option<f64> {
        self.index_set.position(nu).map(|i| self.values[i])
    }

    /// `Σ c_ν Ψ_ν(x)`.
    pub fn eval(&self, x: &[f64]) -> Result<f64> {
        let pts = ArrayView2::from_shape((1, x.len()), x).map_err(|e| Error::invalid(e.to_string()))?;
        Ok(self.eval_many(pts)?[0])
    }

    /// Evaluates the expansion at each row of `points`.
    pub fn eval_many(&self, points: ArrayView2<f64>) -> Result<Vec<f64>> {
        check_points(points, self.index_set.dim())?;
        let eval = BasisEvaluator::new(&self.index_set);
        let coeffs = self.values.as_slice().expect("contiguous");
        Ok((0..points.nrows())
            .into_par_iter()
            .map_init(
                || vec![0.0; coeffs.len()],
                |row, i| {
                    eval.fill_row(points.row(i), 1.0, row);
                    row.iter().zip(coeffs).map(|(a, b)| a * b).sum()
                },
            )
            .collect())
    }

    /// CSV: a header of index labels, then one row of values.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        let header: Vec<String> = self.index_set.iter().map(|n| n.label()).collect();
        writeln!(w, "{}", header.join(","))?;
        let row: Vec<String> = self.values.iter().map(|v| format!("{v:.16e}")).collect();
        writeln!(w, "{}", row.join(","))?;
        Ok(())
    }

    pub fn read_csv<R: BufRead>(r: R) -> Result<Self> {
        let mut lines = r.lines();
        let header = lines.next().ok_or_else(|| Error::Parse("missing header".into()))??;
        let values = lines.next().ok_or_else(|| Error::Parse("missing values row".into()))??;
        let indices = header.split(',').map(MultiIndex::parse_label).collect::<Result<Vec<_>>>()?;
        let dim = indices.first().map_or(1, MultiIndex::dim);
        let vals = values
            .split(',')
            .map(|t| t.trim().parse::<f64>().map_err(|e| Error::Parse(e.to_string())))
            .collect::<Result<Vec<_>>>()?;
        if vals.len() != indices.len() {
            return Err(Error::Parse("header and value counts differ".into()));
        }
        // re-align in case the file order is not canonical
        let set = MultiIndexSet::new(dim, indices.clone())?;
        let mut aligned = Array1::zeros(set.len());
        for (nu, v) in indices.iter().zip(vals) {
            aligned[set.position(nu).expect("member")] = v;
        }
        ExpansionCoefficients::new(set, aligned)
    }
}

/// Evaluates `c` at `x`.
pub fn eval_expansion(c: &ExpansionCoefficients, x: &[f64]) -> Result<f64> {
    c.eval(x)
}

/// The normalized measurement matrix together with its sample points and basis.
#[derive(Debug, Clone)]
pub struct MeasurementMatrix {
    matrix: Array2<f64>,
    points: Array2<f64>,
    index_set: MultiIndexSet,
}

impl MeasurementMatrix {
    /// Wraps an arbitrary matrix (used for synthetic solver problems). `points`
    /// may be empty in that case.
    pub fn from_parts(matrix: Array2<f64>, points: Array2<f64>, index_set: MultiIndexSet) -> Result<Self> {
        if matrix.ncols() != index_set.len() {
            return Err(Error::DimensionMismatch { expected: index_set.len(), found: matrix.ncols() });
        }
        Ok(MeasurementMatrix { matrix, points, index_set })
    }

    pub fn matrix(&self) -> &Array2<f64> {
        &self.matrix
    }

    pub fn points(&self) -> &Array2<f64> {
        &self.points
    }

    pub fn index_set(&self) -> &MultiIndexSet {
        &self.index_set
    }

    pub fn rows(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn cols(&self) -> usize {
        self.matrix.ncols()
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        let header: Vec<String> = self.index_set.iter().map(|n| n.label()).collect();
        writeln!(w, "{}", header.join(","))?;
        for row in self.matrix.axis_iter(Axis(0)) {
            let cells: Vec<String> = row.iter().map(|v| format!("{v:.16e}")).collect();
            writeln!(w, "{}", cells.join(","))?;
        }
        Ok(())
    }
}

/// Builds `A(i, ν) = Ψ_ν(x_i)/√m` and `f_i = values_i/√m`.
pub fn assemble_system(
    points: ArrayView2<f64>,
    values: &[f64],
    index_set: &MultiIndexSet,
) -> Result<(MeasurementMatrix, Array1<f64>)> {
    let m = points.nrows();
    if m == 0 {
        return Err(Error::invalid("no sample points"));
    }
    if index_set.is_empty() {
        return Err(Error::invalid("empty index set"));
    }
    if values.len() != m {
        return Err(Error::DimensionMismatch { expected: m, found: values.len() });
    }
    let scale = 1.0 / (m as f64).sqrt();
    let matrix = basis_matrix(points, index_set, scale)?;
    let rhs = values.iter().map(|v| v * scale).collect();
    Ok((MeasurementMatrix { matrix, points: points.to_owned(), index_set: index_set.clone() }, rhs))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::multiindex::{hyperbolic_cross, legendre_weights};
    use ndarray::array;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};

    // explicit P_0..P_4
    fn explicit(nu: u32, x: f64) -> f64 {
        let p = match nu {
            0 => 1.0,
            1 => x,
            2 => (3.0 * x * x - 1.0) / 2.0,
            3 => (5.0 * x.powi(3) - 3.0 * x) / 2.0,
            4 => (35.0 * x.powi(4) - 30.0 * x * x + 3.0) / 8.0,
            _ => unreachable!(),
        };
        p * (2.0 * nu as f64 + 1.0).sqrt()
    }

    #[test]
    fn one_dimensional_values() {
        assert_eq!(legendre_1d(0, 0.37).unwrap(), 1.0);
        assert!((legendre_1d(2, 1.0).unwrap() - 5f64.sqrt()).abs() < 1e-15);
        assert!((legendre_1d(2, 0.0).unwrap() - (-1.118_033_988_749_895)).abs() < 1e-15);
        assert!(matches!(legendre_1d(3, 1.2), Err(Error::Domain { .. })));
    }

    #[test]
    fn recurrence_matches_explicit_formulas() {
        for i in 0..=200 {
            let x = -1.0 + i as f64 / 100.0;
            for nu in 0..=4 {
                assert!((legendre_1d(nu, x).unwrap() - explicit(nu, x)).abs() < 1e-14, "nu={nu} x={x}");
            }
        }
    }

    #[test]
    fn sup_bound_on_fine_grid() {
        let mut table = vec![0.0; 201];
        for i in 0..=10_000 {
            let x = -1.0 + 2.0 * i as f64 / 10_000.0;
            fill_table(x, &mut table);
            for (nu, v) in table.iter().enumerate() {
                assert!(v.abs() <= (2.0 * nu as f64 + 1.0).sqrt() * (1.0 + 1e-12), "nu={nu} x={x}");
            }
        }
    }

    #[test]
    fn tensor_values() {
        let x = [0.3, -0.8, 0.1];
        assert_eq!(tensor_eval(&MultiIndex::zero(3), &x).unwrap(), 1.0);
        assert!((tensor_eval(&[1, 1].into(), &[1.0, 1.0]).unwrap() - 3.0).abs() < 1e-14);
        assert!((tensor_eval(&[2, 0].into(), &[0.0, 0.7]).unwrap() + 1.118_033_988_749_895).abs() < 1e-14);
        assert!(matches!(tensor_eval(&[1, 1].into(), &x), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn assemble_small_systems() {
        let set = MultiIndexSet::new(1, vec![MultiIndex::zero(1)]).unwrap();
        let (a, f) = assemble_system(array![[0.3]].view(), &[2.0], &set).unwrap();
        assert_eq!(a.matrix(), &array![[1.0]]);
        assert_eq!(f, array![2.0]);

        let pts = array![[0.1], [0.2], [-0.5], [0.9]];
        let (a, _) = assemble_system(pts.view(), &[0.0; 4], &set).unwrap();
        assert!(a.matrix().iter().all(|&v| v == 0.5));

        assert!(assemble_system(pts.view(), &[0.0; 4], &MultiIndexSet::empty(1)).is_err());
        assert!(assemble_system(Array2::<f64>::zeros((0, 1)).view(), &[], &set).is_err());
        assert!(assemble_system(array![[1.5]].view(), &[1.0], &set).is_err());
    }

    #[test]
    fn assembled_entries_respect_weight_bound() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let set = hyperbolic_cross(3, 12).unwrap();
        let u = legendre_weights(&set);
        let m = 40;
        let pts = Array2::from_shape_fn((m, 3), |_| rng.random_range(-1.0..1.0));
        let (a, _) = assemble_system(pts.view(), &vec![0.0; m], &set).unwrap();
        let scale = 1.0 / (m as f64).sqrt();
        for row in a.matrix().rows() {
            for (v, w) in row.iter().zip(u.values()) {
                assert!(v.abs() <= w * scale * (1.0 + 1e-12));
            }
        }
        // agrees with pointwise tensor evaluation
        for (i, nu) in set.iter().enumerate().step_by(7) {
            let x: Vec<f64> = pts.row(5).to_vec();
            assert!((a.matrix()[[5, i]] - tensor_eval(nu, &x).unwrap() * scale).abs() < 1e-13);
        }
    }

    #[test]
    fn expansion_matches_direct_polynomial() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let set = hyperbolic_cross(2, 6).unwrap();
        let vals = Array1::from_shape_fn(set.len(), |_| rng.random_range(-1.0..1.0));
        let c = ExpansionCoefficients::new(set.clone(), vals.clone()).unwrap();
        for _ in 0..100 {
            let x = [rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)];
            let direct: f64 = set.iter().zip(vals.iter()).map(|(nu, v)| v * tensor_eval(nu, &x).unwrap()).sum();
            assert!((c.eval(&x).unwrap() - direct).abs() < 1e-12);
        }
        let mut e0 = Array1::zeros(set.len());
        e0[0] = 1.0;
        let one = ExpansionCoefficients::new(set.clone(), e0).unwrap();
        assert!((eval_expansion(&one, &[0.4, -0.9]).unwrap() - 1.0).abs() < 1e-15);
        assert_eq!(ExpansionCoefficients::zeros(&set).eval(&[0.4, -0.9]).unwrap(), 0.0);
    }

    #[test]
    fn coefficient_csv_round_trip() {
        let set = hyperbolic_cross(2, 4).unwrap();
        let c = ExpansionCoefficients::new(set.clone(), Array1::linspace(-1.0, 1.0, set.len())).unwrap();
        let mut buf = Vec::new();
        c.write_csv(&mut buf).unwrap();
        assert!(String::from_utf8(buf.clone()).unwrap().starts_with("0:0,0:1,1:0"));
        assert_eq!(ExpansionCoefficients::read_csv(buf.as_slice()).unwrap(), c);
    }

    proptest! {
        #[test]
        fn parity(nu in 0u32..60, x in -1.0f64..1.0) {
            let a = legendre_1d(nu, -x).unwrap();
            let b = legendre_1d(nu, x).unwrap();
            let sign = if nu % 2 == 0 { 1.0 } else { -1.0 };
            prop_assert!((a - sign * b).abs() <= 1e-12 * (1.0 + b.abs()));
        }
    }
}
