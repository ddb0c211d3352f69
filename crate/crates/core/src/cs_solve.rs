//! Weighted ℓ1 recovery (QCBP, LASSO, square-root LASSO) by a primal-dual
//! proximal splitting iteration, and the lower restricted isometry constant.

use std::time::Instant;

use nalgebra::{DMatrix, SymmetricEigen};
use ndarray::{Array1, Array2, ArrayView1};
use rand::Rng;
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::error::{Error, Result};
use crate::legendre::{ExpansionCoefficients, MeasurementMatrix};
use crate::multiindex::{intrinsic_lower_sparsity, legendre_weights, WeightVector};
use crate::rng::{stream_rng, Stream};

/// The optimization problem to solve. `z` ranges over coefficient vectors.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Variant {
    /// min ‖z‖_{1,u} subject to ‖Az − f‖₂ ≤ η
    Qcbp { eta: f64 },
    /// min ‖z‖_{1,u} + μ‖Az − f‖₂²
    Lasso { mu: f64 },
    /// min ‖z‖_{1,u} + μ‖Az − f‖₂
    SrLasso { mu: f64 },
}

#[derive(Debug, Clone)]
pub struct CsProblem {
    a: MeasurementMatrix,
    f: Array1<f64>,
    weights: Vec<f64>,
    variant: Variant,
}

impl CsProblem {
    /// `weights = None` means all ones.
    pub fn new(a: MeasurementMatrix, f: Array1<f64>, weights: Option<&WeightVector>, variant: Variant) -> Result<Self> {
        if f.len() != a.rows() {
            return Err(Error::DimensionMismatch { expected: a.rows(), found: f.len() });
        }
        let weights = match weights {
            Some(w) => {
                if w.index_set() != a.index_set() {
                    return Err(Error::invalid("weights and matrix use different index sets"));
                }
                w.values().to_vec()
            }
            None => vec![1.0; a.cols()],
        };
        if weights.iter().any(|w| !(*w > 0.0) || !w.is_finite()) {
            return Err(Error::invalid("weights must be positive and finite"));
        }
        match variant {
            Variant::Qcbp { eta } if !(eta >= 0.0) || !eta.is_finite() => {
                return Err(Error::invalid(format!("eta must be finite and nonnegative, got {eta}")))
            }
            Variant::Lasso { mu } | Variant::SrLasso { mu } if !(mu > 0.0) || !mu.is_finite() => {
                return Err(Error::invalid(format!("mu must be finite and positive, got {mu}")))
            }
            _ => {}
        }
        if f.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("right-hand side has non-finite entries"));
        }
        Ok(CsProblem { a, f, weights, variant })
    }

    /// The same problem with Legendre weights `u_ν = ∏√(2ν_j+1)`.
    pub fn weighted(a: MeasurementMatrix, f: Array1<f64>, variant: Variant) -> Result<Self> {
        let u = legendre_weights(a.index_set());
        CsProblem::new(a, f, Some(&u), variant)
    }

    pub fn matrix(&self) -> &MeasurementMatrix {
        &self.a
    }

    pub fn rhs(&self) -> &Array1<f64> {
        &self.f
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn variant(&self) -> Variant {
        self.variant
    }

    /// Objective of the selected variant at `z`. For QCBP this is the weighted
    /// ℓ1 norm, or `+∞` when `z` is infeasible beyond `slack`.
    pub fn objective(&self, z: ArrayView1<f64>, slack: f64) -> f64 {
        let l1: f64 = z.iter().zip(&self.weights).map(|(v, w)| w * v.abs()).sum();
        let r = self.a.matrix().dot(&z) - &self.f;
        let rn = r.dot(&r).sqrt();
        match self.variant {
            Variant::Qcbp { eta } => {
                if rn <= eta + slack {
                    l1
                } else {
                    f64::INFINITY
                }
            }
            Variant::Lasso { mu } => l1 + mu * rn * rn,
            Variant::SrLasso { mu } => l1 + mu * rn,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverOptions {
    pub max_iterations: usize,
    pub stop_tolerance: f64,
    pub step_scale: f64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions { max_iterations: 100_000, stop_tolerance: 1e-8, step_scale: 0.9 }
    }
}

impl SolverOptions {
    fn validate(&self) -> Result<()> {
        if self.max_iterations == 0 || !(self.stop_tolerance > 0.0) || !(self.step_scale > 0.0 && self.step_scale < 1.0) {
            return Err(Error::invalid("solver options must be positive with step_scale in (0, 1)"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct CsSolution {
    pub coefficients: ExpansionCoefficients,
    pub residual_norm: f64,
    /// Objective every ten iterations.
    pub objective_trace: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    pub wall_seconds: f64,
}

impl CsSolution {
    pub fn to_json(&self) -> serde_json::Value {
        let coeffs: serde_json::Map<String, serde_json::Value> = self
            .coefficients
            .index_set()
            .iter()
            .zip(self.coefficients.values())
            .map(|(nu, c)| (nu.label(), json!(c)))
            .collect();
        json!({
            "coefficients": coeffs,
            "residual": self.residual_norm,
            "iterations": self.iterations,
            "converged": self.converged,
            "wall_seconds": self.wall_seconds,
        })
    }
}

/// Estimate of the spectral norm `‖A‖₂` by power iteration on `AᵀA`.
pub fn operator_norm(a: &Array2<f64>) -> Result<f64> {
    // tighter than needed so the ×1.01 safety margin in `solve` dominates
    const TOL: f64 = 1e-9;
    const MAX_ITER: usize = 10_000;
    let n = a.ncols();
    if n == 0 || a.nrows() == 0 || a.iter().all(|v| *v == 0.0) {
        return Err(Error::invalid("operator norm of a zero matrix"));
    }
    let mut rng = stream_rng(0, Stream::Init, &[a.nrows() as u64, n as u64]);
    let mut v = Array1::from_shape_fn(n, |_| rng.random::<f64>() + 0.5);
    v /= v.dot(&v).sqrt();
    let mut lambda = 0.0;
    for _ in 0..MAX_ITER {
        let w = a.t().dot(&a.dot(&v));
        let next = v.dot(&w);
        let norm = w.dot(&w).sqrt();
        if norm == 0.0 {
            // v fell in the null space; the start had no component elsewhere
            return Err(Error::Numerical("power iteration collapsed".into()));
        }
        v = w / norm;
        if (next - lambda).abs() <= TOL * next {
            lambda = next;
            break;
        }
        lambda = next;
    }
    Ok(lambda.sqrt())
}

/// Entrywise `sign(z_i) max(|z_i| − t_i, 0)`.
pub fn weighted_soft_threshold(z: ArrayView1<f64>, thresholds: &[f64]) -> Result<Array1<f64>> {
    if z.len() != thresholds.len() {
        return Err(Error::DimensionMismatch { expected: z.len(), found: thresholds.len() });
    }
    if thresholds.iter().any(|t| !(*t > 0.0)) {
        return Err(Error::invalid("thresholds must be positive"));
    }
    Ok(Array1::from_iter(z.iter().zip(thresholds).map(|(&v, &t)| soft(v, t))))
}

#[inline]
fn soft(v: f64, t: f64) -> f64 {
    if v > t {
        v - t
    } else if v < -t {
        v + t
    } else {
        0.0
    }
}

fn norm(v: &Array1<f64>) -> f64 {
    v.dot(v).sqrt()
}

/// Solves the problem with the Chambolle–Pock iteration (θ = 1).
pub fn solve(problem: &CsProblem, opts: &SolverOptions) -> Result<CsSolution> {
    opts.validate()?;
    let start = Instant::now();
    let a = problem.a.matrix();
    let at = a.t().as_standard_layout().into_owned();
    let f = &problem.f;
    let (m, n) = a.dim();
    let f_norm = norm(f);

    let step = opts.step_scale / (1.01 * operator_norm(a)?);
    let (tau, sigma) = (step, step);
    let thresholds: Vec<f64> = problem.weights.iter().map(|w| tau * w).collect();

    let mut z = Array1::<f64>::zeros(n);
    let mut z_bar = z.clone();
    let mut y = Array1::<f64>::zeros(m);

    let slack = 10.0 * opts.stop_tolerance * f_norm;
    let track_best = !matches!(problem.variant, Variant::Qcbp { .. });
    let mut best_obj = problem.objective(z.view(), slack);
    let mut best = z.clone();
    let mut trace = Vec::new();
    let mut converged = false;
    let mut iterations = 0;

    for k in 1..=opts.max_iterations {
        iterations = k;
        let v = &y + &(a.dot(&z_bar) * sigma);
        y = dual_prox(problem.variant, v, f, sigma);
        let grad = at.dot(&y);
        let mut z_new = Array1::zeros(n);
        for i in 0..n {
            z_new[i] = soft(z[i] - tau * grad[i], thresholds[i]);
        }
        if k % 10 == 0 {
            if z_new.iter().any(|v| !v.is_finite()) || y.iter().any(|v| !v.is_finite()) {
                return Err(Error::SolverDivergence { iteration: k });
            }
            let change = norm(&(&z_new - &z)) / norm(&z).max(1e-12);
            let obj = problem.objective(z_new.view(), slack);
            trace.push(obj);
            if track_best && obj <= best_obj {
                best_obj = obj;
                best.assign(&z_new);
            }
            let feasible = match problem.variant {
                Variant::Qcbp { eta } => {
                    let r = a.dot(&z_new) - f;
                    norm(&r) <= eta + slack
                }
                _ => true,
            };
            if change < opts.stop_tolerance && feasible {
                z = z_new;
                converged = true;
                break;
            }
        }
        z_bar = &z_new * 2.0 - &z;
        z = z_new;
    }

    if track_best {
        let obj = problem.objective(z.view(), slack);
        if obj <= best_obj {
            best.assign(&z);
        }
        z = best;
    }
    let r = a.dot(&z) - f;
    let residual_norm = norm(&r);
    if !residual_norm.is_finite() {
        return Err(Error::SolverDivergence { iteration: iterations });
    }
    Ok(CsSolution {
        coefficients: ExpansionCoefficients::new(problem.a.index_set().clone(), z)?,
        residual_norm,
        objective_trace: trace,
        iterations,
        converged,
        wall_seconds: start.elapsed().as_secs_f64(),
    })
}

fn dual_prox(variant: Variant, mut v: Array1<f64>, f: &Array1<f64>, sigma: f64) -> Array1<f64> {
    match variant {
        Variant::Qcbp { eta } => {
            // v − σ·proj_{B(f,η)}(v/σ)
            let mut d = &v / sigma - f;
            let dn = norm(&d);
            if dn > eta {
                d *= eta / dn;
            }
            v -= &((&d + f) * sigma);
            v
        }
        Variant::SrLasso { mu } => {
            v.scaled_add(-sigma, f);
            let vn = norm(&v);
            if vn > mu {
                v *= mu / vn;
            }
            v
        }
        Variant::Lasso { mu } => {
            v.scaled_add(-sigma, f);
            v / (1.0 + sigma / (2.0 * mu))
        }
    }
}

/// `μ = (12√42/35)·s`.
pub fn mu_theoretical(s: usize) -> Result<f64> {
    if s == 0 {
        return Err(Error::invalid("s must be at least 1"));
    }
    Ok(12.0 * 42f64.sqrt() / 35.0 * s as f64)
}

pub const RIP_MAX_COLUMNS: usize = 25;
pub const RIP_MAX_S: usize = 4;

/// Largest `|λ(A_Sᵀ A_S) − 1|` over supports `S` of the matrix's index set
/// with `Σ_{ν∈S} u_ν² ≤ K(s)`.
pub fn lower_rip_constant(a: &MeasurementMatrix, s: usize) -> Result<f64> {
    let n = a.cols();
    if n > RIP_MAX_COLUMNS {
        return Err(Error::CapExceeded { what: "lower RIP columns", required: n as u128, cap: RIP_MAX_COLUMNS as u128 });
    }
    if s > RIP_MAX_S {
        return Err(Error::CapExceeded { what: "lower RIP sparsity", required: s as u128, cap: RIP_MAX_S as u128 });
    }
    if s == 0 {
        return Err(Error::invalid("s must be at least 1"));
    }
    let budget = intrinsic_lower_sparsity(a.index_set().dim(), s)?;
    let u2: Vec<f64> = a.index_set().iter().map(|nu| nu.legendre_weight_sq() as f64).collect();
    let gram = {
        let m = a.matrix();
        m.t().dot(m)
    };
    let mut best = 0.0f64;
    let mut support = Vec::new();
    rip_search(&gram, &u2, budget, 0, 0.0, &mut support, &mut best);
    Ok(best)
}

fn rip_search(gram: &Array2<f64>, u2: &[f64], budget: f64, from: usize, used: f64, support: &mut Vec<usize>, best: &mut f64) {
    for i in from..u2.len() {
        if used + u2[i] > budget + 1e-9 {
            continue;
        }
        support.push(i);
        let k = support.len();
        let sub = DMatrix::from_fn(k, k, |r, c| gram[[support[r], support[c]]]);
        let eig = SymmetricEigen::new(sub).eigenvalues;
        for lam in eig.iter() {
            *best = best.max((lam - 1.0).abs());
        }
        rip_search(gram, u2, budget, i + 1, used + u2[i], support, best);
        support.pop();
    }
}
