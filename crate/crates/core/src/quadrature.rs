//! Nested Clenshaw–Curtis rules and their Smolyak sparse-grid combination,
//! normalized to the uniform probability measure on `(-1, 1)^d`; reference
//! Legendre coefficients and the relative L² error.

use std::collections::HashMap;
use std::io::Write;

use ndarray::{Array1, Array2, ArrayView2};
use rayon::prelude::*;
use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

use crate::error::{Error, Result};
use crate::legendre::{BasisEvaluator, ExpansionCoefficients, MeasurementMatrix};
use crate::multiindex::MultiIndexSet;

pub const MAX_CC_LEVEL: u32 = 20;
pub const DEFAULT_NODE_CAP: u128 = 5_000_000;
/// Points in the default quasi-Monte Carlo test grid.
pub const DEFAULT_QMC_POINTS: usize = 200_000;

/// How a rule was built.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RuleKind {
    /// Smolyak sparse grid over nested Clenshaw–Curtis rules at this level.
    SparseGrid { level: u32 },
    /// Equal-weight Kronecker lattice with this many points.
    Lattice { points: usize },
}

/// Nodes in `[-1, 1]^d` with weights summing to one.
#[derive(Debug, Clone)]
pub struct QuadratureRule {
    kind: RuleKind,
    nodes: Array2<f64>,
    weights: Vec<f64>,
}

impl QuadratureRule {
    pub fn dim(&self) -> usize {
        self.nodes.ncols()
    }

    pub fn kind(&self) -> RuleKind {
        self.kind
    }

    pub fn level(&self) -> Option<u32> {
        match self.kind {
            RuleKind::SparseGrid { level } => Some(level),
            RuleKind::Lattice { .. } => None,
        }
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn nodes(&self) -> ArrayView2<'_, f64> {
        self.nodes.view()
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Evaluates `g` at every node.
    pub fn eval<G>(&self, g: G) -> Vec<f64>
    where
        G: Fn(&[f64]) -> f64 + Sync,
    {
        (0..self.len())
            .into_par_iter()
            .map(|i| {
                let row = self.nodes.row(i);
                g(row.as_slice().expect("row-major nodes"))
            })
            .collect()
    }

    /// One node per row: coordinates, then the weight.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        let mut header: Vec<String> = (1..=self.dim()).map(|j| format!("x{j}")).collect();
        header.push("weight".into());
        writeln!(w, "{}", header.join(","))?;
        for (row, wt) in self.nodes.rows().into_iter().zip(&self.weights) {
            let mut cells: Vec<String> = row.iter().map(|v| format!("{v:.16e}")).collect();
            cells.push(format!("{wt:.16e}"));
            writeln!(w, "{}", cells.join(","))?;
        }
        Ok(())
    }
}

/// Deterministic pairwise summation.
pub fn pairwise_sum(values: &[f64]) -> f64 {
    const BLOCK: usize = 128;
    if values.len() <= BLOCK {
        values.iter().sum()
    } else {
        let mid = values.len() / 2;
        pairwise_sum(&values[..mid]) + pairwise_sum(&values[mid..])
    }
}

fn gcd(mut a: u64, mut b: u64) -> u64 {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

// −cos(π k / n) with the fraction reduced, so equal nodes on different levels
// are bitwise identical.
fn cc_node(k: u64, n: u64) -> f64 {
    if 2 * k == n {
        return 0.0;
    }
    if 2 * k > n {
        return -cc_node(n - k, n);
    }
    let g = gcd(k, n);
    let (k, n) = (k / g, n / g);
    -(std::f64::consts::PI * k as f64 / n as f64).cos()
}

fn cc_points(level: u32) -> usize {
    if level == 0 {
        1
    } else {
        (1usize << level) + 1
    }
}

/// Clenshaw–Curtis nodes (ascending) and probability weights.
fn cc_nodes_weights(level: u32) -> (Vec<f64>, Vec<f64>) {
    if level == 0 {
        return (vec![0.0], vec![1.0]);
    }
    let n = 1usize << level;
    let nodes = (0..=n).map(|j| cc_node(j as u64, n as u64)).collect();

    // w_j = c_j/n · (1 − Σ_{k=1}^{n/2} b_k cos(2πkj/n)/(4k²−1)); the sum is the
    // real DFT of the even extension h_k = h_{n−k} = 1/(4k²−1).
    let mut buf = vec![Complex::new(0.0, 0.0); n];
    for k in 1..=n / 2 {
        let h = 1.0 / (4.0 * (k * k) as f64 - 1.0);
        buf[k].re = h;
        buf[n - k].re = h;
    }
    FftPlanner::new().plan_fft_forward(n).process(&mut buf);
    let mut weights: Vec<f64> = (0..=n)
        .map(|j| {
            let c = if j == 0 || j == n { 1.0 } else { 2.0 };
            // halve for the probability measure
            0.5 * c / n as f64 * (1.0 - buf[j % n].re)
        })
        .collect();
    for j in 0..n / 2 {
        let avg = 0.5 * (weights[j] + weights[n - j]);
        weights[j] = avg;
        weights[n - j] = avg;
    }
    (nodes, weights)
}

/// The univariate Clenshaw–Curtis rule: one node at level 0, `2^ℓ + 1` nodes
/// `cos(πj/2^ℓ)` at level `ℓ ≥ 1`.
pub fn cc_rule_1d(level: u32) -> Result<QuadratureRule> {
    if level > MAX_CC_LEVEL {
        return Err(Error::CapExceeded { what: "Clenshaw-Curtis level", required: level as u128, cap: MAX_CC_LEVEL as u128 });
    }
    let (nodes, weights) = cc_nodes_weights(level);
    let nodes = Array2::from_shape_vec((nodes.len(), 1), nodes).expect("shape");
    Ok(QuadratureRule { kind: RuleKind::SparseGrid { level }, nodes, weights })
}

fn new_points(level: u32) -> u128 {
    match level {
        0 => 1,
        1 => 2,
        l => 1u128 << (l - 1),
    }
}

/// Number of distinct nodes in the Smolyak grid of the given level.
pub fn smolyak_node_count(d: usize, level: u32) -> u128 {
    // counts[j] = nodes for a budget of j in the dimensions processed so far
    let mut counts = vec![1u128; level as usize + 1];
    for _ in 0..d {
        let prev = counts.clone();
        for (budget, slot) in counts.iter_mut().enumerate() {
            *slot = (0..=budget).map(|l| new_points(l as u32).saturating_mul(prev[budget - l])).fold(0u128, u128::saturating_add);
        }
    }
    counts[level as usize]
}

pub fn smolyak_rule(d: usize, level: u32) -> Result<QuadratureRule> {
    smolyak_rule_capped(d, level, DEFAULT_NODE_CAP)
}

/// Smolyak combination of nested Clenshaw–Curtis rules:
/// `Σ_{L−d+1 ≤ |l| ≤ L} (−1)^{L−|l|} C(d−1, L−|l|) ⊗_j Q_{l_j}`.
pub fn smolyak_rule_capped(d: usize, level: u32, cap: u128) -> Result<QuadratureRule> {
    if d == 0 {
        return Err(Error::invalid("dimension must be positive"));
    }
    if level > MAX_CC_LEVEL {
        return Err(Error::CapExceeded { what: "sparse grid level", required: level as u128, cap: MAX_CC_LEVEL as u128 });
    }
    let count = smolyak_node_count(d, level);
    if count > cap {
        return Err(Error::CapExceeded { what: "sparse grid nodes", required: count, cap });
    }
    if d == 1 {
        return cc_rule_1d(level);
    }

    let rules: Vec<(Vec<f64>, Vec<f64>)> = (0..=level).map(cc_nodes_weights).collect();
    let finest = 1u64 << level;
    // integer position of node j of level l on the finest level
    let key_of = |l: u32, j: usize| -> u64 {
        if level == 0 {
            0
        } else if l == 0 {
            finest / 2
        } else {
            j as u64 * (finest >> l)
        }
    };

    let mut acc: HashMap<Vec<u64>, f64> = HashMap::with_capacity(count as usize);
    let mut levels = vec![0u32; d];
    let lo = (level as i64 - d as i64 + 1).max(0) as u32;
    loop {
        let total: u32 = levels.iter().sum();
        if total >= lo && total <= level {
            let q = (level - total) as u64;
            let coeff = if q.is_multiple_of(2) { 1.0 } else { -1.0 } * binomial(d as u64 - 1, q) as f64;
            add_tensor(&rules, &levels, coeff, &key_of, &mut acc);
        }
        if !next_levels(&mut levels, level) {
            break;
        }
    }

    let mut entries: Vec<(Vec<u64>, f64)> = acc.into_iter().filter(|(_, w)| *w != 0.0).collect();
    entries.sort_unstable_by(|a, b| a.0.cmp(&b.0));
    let mut nodes = Array2::zeros((entries.len(), d));
    let mut weights = Vec::with_capacity(entries.len());
    for (i, (key, w)) in entries.into_iter().enumerate() {
        for (j, k) in key.into_iter().enumerate() {
            nodes[[i, j]] = if level == 0 { 0.0 } else { cc_node(k, finest) };
        }
        weights.push(w);
    }
    Ok(QuadratureRule { kind: RuleKind::SparseGrid { level }, nodes, weights })
}

fn binomial(n: u64, k: u64) -> u64 {
    if k > n {
        return 0;
    }
    (0..k).fold(1u64, |acc, i| acc * (n - i) / (i + 1))
}

// odometer over level vectors with |l| ≤ max
fn next_levels(levels: &mut [u32], max: u32) -> bool {
    for j in 0..levels.len() {
        levels[j] += 1;
        if levels.iter().sum::<u32>() <= max {
            return true;
        }
        levels[j] = 0;
    }
    false
}

fn add_tensor(
    rules: &[(Vec<f64>, Vec<f64>)],
    levels: &[u32],
    coeff: f64,
    key_of: &impl Fn(u32, usize) -> u64,
    acc: &mut HashMap<Vec<u64>, f64>,
) {
    let d = levels.len();
    let sizes: Vec<usize> = levels.iter().map(|&l| cc_points(l)).collect();
    let mut idx = vec![0usize; d];
    loop {
        let mut w = coeff;
        let mut key = Vec::with_capacity(d);
        for j in 0..d {
            let l = levels[j];
            w *= rules[l as usize].1[idx[j]];
            key.push(key_of(l, idx[j]));
        }
        *acc.entry(key).or_insert(0.0) += w;

        let mut j = 0;
        loop {
            if j == d {
                return;
            }
            idx[j] += 1;
            if idx[j] < sizes[j] {
                break;
            }
            idx[j] = 0;
            j += 1;
        }
    }
}

/// Equal-weight Kronecker lattice `x_i = 2·frac(1/2 + i·α) − 1`, with `α`
/// built from the generalized golden ratio of dimension `d`.
pub fn qmc_rule(d: usize, points: usize) -> Result<QuadratureRule> {
    if d == 0 || points == 0 {
        return Err(Error::invalid("lattice needs d >= 1 and at least one point"));
    }
    // unique positive root of x^{d+1} = x + 1
    let mut phi = 2.0f64;
    for _ in 0..100 {
        phi = (1.0 + phi).powf(1.0 / (d as f64 + 1.0));
    }
    let alpha: Vec<f64> = (1..=d).map(|j| (1.0 / phi.powi(j as i32)).fract()).collect();
    let nodes = Array2::from_shape_fn((points, d), |(i, j)| 2.0 * (0.5 + i as f64 * alpha[j]).fract() - 1.0);
    let weights = vec![1.0 / points as f64; points];
    Ok(QuadratureRule { kind: RuleKind::Lattice { points }, nodes, weights })
}

/// `Σ w_i g(x_i)`.
pub fn integrate<G>(rule: &QuadratureRule, g: G) -> f64
where
    G: Fn(&[f64]) -> f64 + Sync,
{
    integrate_values(rule, &rule.eval(g))
}

/// `Σ w_i v_i` for values already evaluated at the nodes.
pub fn integrate_values(rule: &QuadratureRule, values: &[f64]) -> f64 {
    let products: Vec<f64> = rule.weights.iter().zip(values).map(|(w, v)| w * v).collect();
    pairwise_sum(&products)
}

/// Increases the sparse-grid level until two successive integrals of `f²`
/// agree to `rel_tol`, returning the finer rule.
pub fn auto_level<F>(d: usize, f: F, rel_tol: f64, start: u32, cap: u128) -> Result<QuadratureRule>
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    let sq = |x: &[f64]| {
        let v = f(x);
        v * v
    };
    let mut prev = smolyak_rule_capped(d, start, cap)?;
    let mut prev_val = integrate(&prev, sq);
    loop {
        let level = prev.level().unwrap_or(start) + 1;
        let next = smolyak_rule_capped(d, level, cap)?;
        let val = integrate(&next, sq);
        if (val - prev_val).abs() <= rel_tol * val.abs().max(f64::MIN_POSITIVE) {
            return Ok(next);
        }
        prev = next;
        prev_val = val;
    }
}

/// `c_ν = Σ w_i f(x_i) Ψ_ν(x_i)` for every `ν` in `index_set`.
pub fn reference_coefficients<F>(rule: &QuadratureRule, f: F, index_set: &MultiIndexSet) -> Result<ExpansionCoefficients>
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    let values = rule.eval(f);
    reference_coefficients_from_values(rule, &values, index_set)
}

pub fn reference_coefficients_from_values(
    rule: &QuadratureRule,
    values: &[f64],
    index_set: &MultiIndexSet,
) -> Result<ExpansionCoefficients> {
    if index_set.dim() != rule.dim() {
        return Err(Error::DimensionMismatch { expected: rule.dim(), found: index_set.dim() });
    }
    const CHUNK: usize = 1024;
    let n = index_set.len();
    let eval = BasisEvaluator::new(index_set);
    // fixed chunking keeps the reduction order independent of scheduling
    let partials: Vec<Vec<f64>> = (0..rule.len().div_ceil(CHUNK))
        .into_par_iter()
        .map(|c| {
            let mut acc = vec![0.0; n];
            let mut row = vec![0.0; n];
            for i in c * CHUNK..((c + 1) * CHUNK).min(rule.len()) {
                eval.fill_row(rule.nodes.row(i), rule.weights[i] * values[i], &mut row);
                acc.iter_mut().zip(&row).for_each(|(a, r)| *a += r);
            }
            acc
        })
        .collect();
    let mut coeffs = Array1::zeros(n);
    for (k, c) in coeffs.iter_mut().enumerate() {
        let column: Vec<f64> = partials.iter().map(|p| p[k]).collect();
        *c = pairwise_sum(&column);
    }
    ExpansionCoefficients::new(index_set.clone(), coeffs)
}

/// `√(Σ w (f − g)²) / √(Σ w f²)` from node values.
pub fn relative_l2_error_values(rule: &QuadratureRule, f: &[f64], approx: &[f64]) -> Result<f64> {
    if f.len() != rule.len() || approx.len() != rule.len() {
        return Err(Error::DimensionMismatch { expected: rule.len(), found: f.len().min(approx.len()) });
    }
    let num: Vec<f64> = f.iter().zip(approx).map(|(a, b)| (a - b) * (a - b)).collect();
    let den: Vec<f64> = f.iter().map(|a| a * a).collect();
    let (num, den) = (integrate_values(rule, &num), integrate_values(rule, &den));
    if !(den > 0.0) {
        return Err(Error::Numerical("target has zero norm under the rule".into()));
    }
    Ok((num.max(0.0) / den).sqrt())
}

/// Relative L² error of `approx` against `f` under the rule.
pub fn relative_l2_error<F, G>(rule: &QuadratureRule, f: F, approx: G) -> Result<f64>
where
    F: Fn(&[f64]) -> f64 + Sync,
    G: Fn(&[f64]) -> f64 + Sync,
{
    relative_l2_error_values(rule, &rule.eval(f), &rule.eval(approx))
}

/// `η = ‖A c_Λ − f‖₂`.
pub fn reference_eta(a: &MeasurementMatrix, c: &ExpansionCoefficients, f: &Array1<f64>) -> Result<f64> {
    if c.index_set() != a.index_set() {
        return Err(Error::invalid("coefficients and matrix use different index sets"));
    }
    if f.len() != a.rows() {
        return Err(Error::DimensionMismatch { expected: a.rows(), found: f.len() });
    }
    let r = a.matrix().dot(c.values()) - f;
    Ok(r.dot(&r).sqrt())
}
