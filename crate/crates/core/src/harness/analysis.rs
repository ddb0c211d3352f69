//! Coefficient decay and best s-term approximation.

use std::ops::RangeInclusive;

use crate::error::{Error, Result};
use crate::legendre::ExpansionCoefficients;
use crate::lower_sets::{LowerSetSearch, Visit};
use crate::multiindex::{is_lower, MultiIndex};

/// Largest `s` accepted by the lower-constrained best s-term search.
pub const LOWER_S_CAP: usize = 20;
const LOWER_VISIT_CAP: u64 = 10_000_000;

// least-squares slope and intercept of (x, y)
fn line_fit(points: &[(f64, f64)]) -> (f64, f64) {
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = points.iter().map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = points.iter().map(|(x, _)| (x - mx) * (x - mx)).sum();
    let slope = sxy / sxx;
    (slope, my - slope * mx)
}

/// Fits `log|c_ν| ≈ a − ν log ρ` over univariate degrees in `range`, skipping
/// zero coefficients. Returns `(ρ̂, a)`.
pub fn coefficient_decay_fit(coeffs: &ExpansionCoefficients, range: RangeInclusive<u32>) -> Result<(f64, f64)> {
    if coeffs.index_set().dim() != 1 {
        return Err(Error::invalid("decay fit needs univariate coefficients"));
    }
    let points: Vec<(f64, f64)> = range
        .filter_map(|nu| {
            let c = coeffs.get(&MultiIndex::from([nu]))?;
            (c != 0.0 && c.is_finite()).then(|| (nu as f64, c.abs().ln()))
        })
        .collect();
    if points.len() < 3 {
        return Err(Error::invalid(format!("decay fit needs at least 3 nonzero coefficients, found {}", points.len())));
    }
    let (slope, intercept) = line_fit(&points);
    Ok(((-slope).exp(), intercept))
}

/// Ratio `r` of the least-squares fit `log v_k ≈ a + k log r`.
pub fn geometric_ratio(values: &[f64]) -> Result<f64> {
    let points: Vec<(f64, f64)> =
        values.iter().enumerate().filter(|(_, v)| **v > 0.0 && v.is_finite()).map(|(k, v)| (k as f64, v.ln())).collect();
    if points.len() < 2 {
        return Err(Error::invalid("ratio fit needs at least 2 positive values"));
    }
    Ok(line_fit(&points).0.exp())
}

/// ℓ² norm of the coefficients left out by the best `s`-term selection: the
/// `s` largest magnitudes, or the best lower set of at most `s` indices.
pub fn best_s_term_error(coeffs: &ExpansionCoefficients, s: usize, lower_constrained: bool) -> Result<f64> {
    let sq: Vec<f64> = coeffs.values().iter().map(|c| c * c).collect();
    let total: f64 = sq.iter().sum();
    if !lower_constrained {
        let mut sorted = sq.clone();
        sorted.sort_by(|a, b| b.total_cmp(a));
        let tail: f64 = sorted.iter().skip(s).rev().sum();
        return Ok(tail.sqrt());
    }
    if s > LOWER_S_CAP {
        return Err(Error::CapExceeded { what: "lower best s-term size", required: s as u128, cap: LOWER_S_CAP as u128 });
    }
    let set = coeffs.index_set();
    if !is_lower(set) {
        return Err(Error::invalid("lower-constrained selection needs a lower index set"));
    }
    if s == 0 || set.is_empty() {
        return Ok(total.sqrt());
    }
    let mut best = 0.0f64;
    let mut search = LowerSetSearch::new(set.dim(), s.min(set.len()), LOWER_VISIT_CAP);
    search.run(|members| {
        // the newest member is outside the set: its coefficient is zero and,
        // the set being lower, no member of the set lies above it
        if !set.contains(members.last().expect("nonempty")) {
            return Visit::Prune;
        }
        let kept: f64 = members.iter().filter_map(|nu| set.position(nu)).map(|i| sq[i]).sum();
        best = best.max(kept);
        Visit::Descend
    })?;
    Ok((total - best).max(0.0).sqrt())
}
