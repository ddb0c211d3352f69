//! Multi-index sets: hyperbolic crosses, lower sets, Legendre weights, and
//! the intrinsic lower sparsity `K(s)`.

use std::cmp::Ordering;
use std::collections::HashMap;
use std::fmt;
use std::io::{BufRead, Write};
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::lower_sets::{LowerSetSearch, Visit};

/// Default cap on the number of indices a hyperbolic cross may hold.
pub const DEFAULT_HC_CAP: usize = 10_000_000;

/// A multi-index `(ν_1, …, ν_d)` of per-coordinate polynomial degrees.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct MultiIndex(Vec<u32>);

impl MultiIndex {
    pub fn new(entries: Vec<u32>) -> Result<Self> {
        if entries.is_empty() {
            return Err(Error::invalid("multi-index must have at least one entry"));
        }
        Ok(MultiIndex(entries))
    }

    pub fn zero(dim: usize) -> Self {
        MultiIndex(vec![0; dim.max(1)])
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn entries(&self) -> &[u32] {
        &self.0
    }

    pub fn total_degree(&self) -> u64 {
        self.0.iter().map(|&v| v as u64).sum()
    }

    /// `∏ (ν_j + 1)`, the quantity bounded by `s + 1` in a hyperbolic cross.
    pub fn hc_product(&self) -> u128 {
        self.0.iter().map(|&v| v as u128 + 1).product()
    }

    /// Squared Legendre weight `∏ (2ν_j + 1)`, exact in integers.
    pub fn legendre_weight_sq(&self) -> u128 {
        self.0.iter().map(|&v| 2 * v as u128 + 1).product()
    }

    pub fn legendre_weight(&self) -> f64 {
        self.0.iter().map(|&v| (2.0 * v as f64 + 1.0).sqrt()).product()
    }

    /// Componentwise `self ≤ other`.
    pub fn le_componentwise(&self, other: &MultiIndex) -> bool {
        self.0.iter().zip(&other.0).all(|(a, b)| a <= b)
    }

    /// The index with coordinate `j` decreased by one, if that stays nonnegative.
    pub fn predecessor(&self, j: usize) -> Option<MultiIndex> {
        if self.0[j] == 0 {
            return None;
        }
        let mut e = self.0.clone();
        e[j] -= 1;
        Some(MultiIndex(e))
    }

    pub fn successor(&self, j: usize) -> MultiIndex {
        let mut e = self.0.clone();
        e[j] += 1;
        MultiIndex(e)
    }

    /// Label used in CSV headers, e.g. `1:0:2`.
    pub fn label(&self) -> String {
        self.0.iter().map(u32::to_string).collect::<Vec<_>>().join(":")
    }

    pub fn parse_label(s: &str) -> Result<Self> {
        let entries = s
            .split(':')
            .map(|t| t.trim().parse::<u32>().map_err(|e| Error::Parse(format!("index label {s:?}: {e}"))))
            .collect::<Result<Vec<_>>>()?;
        MultiIndex::new(entries)
    }
}

impl From<&[u32]> for MultiIndex {
    fn from(v: &[u32]) -> Self {
        MultiIndex(v.to_vec())
    }
}

impl<const N: usize> From<[u32; N]> for MultiIndex {
    fn from(v: [u32; N]) -> Self {
        MultiIndex(v.to_vec())
    }
}

/// Graded lexicographic order: total degree first, then lexicographic.
impl Ord for MultiIndex {
    fn cmp(&self, other: &Self) -> Ordering {
        self.total_degree()
            .cmp(&other.total_degree())
            .then_with(|| self.0.cmp(&other.0))
    }
}

impl PartialOrd for MultiIndex {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for MultiIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (i, v) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{v}")?;
        }
        write!(f, ")")
    }
}

#[derive(Debug)]
struct SetInner {
    dim: usize,
    indices: Vec<MultiIndex>,
    position: HashMap<MultiIndex, usize>,
}

/// A canonically ordered, duplicate-free set of multi-indices sharing one
/// dimension. Cloning is cheap.
#[derive(Debug, Clone)]
pub struct MultiIndexSet {
    inner: Arc<SetInner>,
}

impl PartialEq for MultiIndexSet {
    fn eq(&self, other: &Self) -> bool {
        self.inner.dim == other.inner.dim && self.inner.indices == other.inner.indices
    }
}

impl MultiIndexSet {
    /// Builds a set from arbitrary indices; duplicates are merged and the
    /// result is sorted canonically.
    pub fn new(dim: usize, mut indices: Vec<MultiIndex>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::invalid("dimension must be positive"));
        }
        if let Some(bad) = indices.iter().find(|n| n.dim() != dim) {
            return Err(Error::DimensionMismatch { expected: dim, found: bad.dim() });
        }
        indices.sort_unstable();
        indices.dedup();
        Ok(Self::from_sorted(dim, indices))
    }

    fn from_sorted(dim: usize, indices: Vec<MultiIndex>) -> Self {
        let position = indices.iter().cloned().enumerate().map(|(i, n)| (n, i)).collect();
        MultiIndexSet { inner: Arc::new(SetInner { dim, indices, position }) }
    }

    pub fn empty(dim: usize) -> Self {
        Self::from_sorted(dim.max(1), Vec::new())
    }

    pub fn dim(&self) -> usize {
        self.inner.dim
    }

    pub fn len(&self) -> usize {
        self.inner.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inner.indices.is_empty()
    }

    pub fn indices(&self) -> &[MultiIndex] {
        &self.inner.indices
    }

    pub fn iter(&self) -> std::slice::Iter<'_, MultiIndex> {
        self.inner.indices.iter()
    }

    pub fn position(&self, nu: &MultiIndex) -> Option<usize> {
        self.inner.position.get(nu).copied()
    }

    pub fn contains(&self, nu: &MultiIndex) -> bool {
        self.inner.position.contains_key(nu)
    }

    /// Largest degree appearing in coordinate `j`.
    pub fn max_degree(&self, j: usize) -> u32 {
        self.iter().map(|n| n.entries()[j]).max().unwrap_or(0)
    }

    /// Smallest `s` such that the set is contained in the hyperbolic cross of degree `s`.
    pub fn hc_degree(&self) -> u128 {
        self.iter().map(|n| n.hc_product() - 1).max().unwrap_or(0)
    }

    /// Writes the text form: a `d s` header, then one index per line.
    pub fn write_text<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "{} {}", self.dim(), self.hc_degree())?;
        for nu in self.iter() {
            let line = nu.entries().iter().map(u32::to_string).collect::<Vec<_>>().join(" ");
            writeln!(w, "{line}")?;
        }
        Ok(())
    }

    pub fn read_text<R: BufRead>(r: R) -> Result<Self> {
        let mut lines = r.lines();
        let header = lines.next().ok_or_else(|| Error::Parse("empty multi-index file".into()))??;
        let mut parts = header.split_whitespace();
        let dim: usize = parts
            .next()
            .and_then(|t| t.parse().ok())
            .ok_or_else(|| Error::Parse(format!("bad header {header:?}")))?;
        let mut indices = Vec::new();
        for line in lines {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let entries = line
                .split_whitespace()
                .map(|t| t.parse::<u32>().map_err(|e| Error::Parse(format!("{line:?}: {e}"))))
                .collect::<Result<Vec<_>>>()?;
            indices.push(MultiIndex::new(entries)?);
        }
        MultiIndexSet::new(dim, indices)
    }
}

/// Per-index positive weights aligned with a [`MultiIndexSet`].
#[derive(Debug, Clone)]
pub struct WeightVector {
    set: MultiIndexSet,
    values: Vec<f64>,
}

impl WeightVector {
    pub fn new(set: MultiIndexSet, values: Vec<f64>) -> Result<Self> {
        if values.len() != set.len() {
            return Err(Error::DimensionMismatch { expected: set.len(), found: values.len() });
        }
        if values.iter().any(|&v| !(v > 0.0) || !v.is_finite()) {
            return Err(Error::invalid("weights must be positive and finite"));
        }
        Ok(WeightVector { set, values })
    }

    pub fn ones(set: &MultiIndexSet) -> Self {
        WeightVector { set: set.clone(), values: vec![1.0; set.len()] }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn index_set(&self) -> &MultiIndexSet {
        &self.set
    }

    pub fn get(&self, nu: &MultiIndex) -> Option<f64> {
        self.set.position(nu).map(|i| self.values[i])
    }
}

fn count_hc(dim: usize, bound: u128, cap: u128) -> u128 {
    // number of ν in N^dim with ∏(ν_j+1) ≤ bound, stopping early past `cap`
    if dim == 0 {
        return 1;
    }
    let mut total = 0u128;
    let mut k = 1u128;
    while k <= bound {
        total += count_hc(dim - 1, bound / k, cap);
        if total > cap {
            return total;
        }
        k += 1;
    }
    total
}

/// Cardinality of the hyperbolic cross of degree `s` in `d` dimensions.
pub fn hc_cardinality(d: usize, s: usize) -> u128 {
    count_hc(d, s as u128 + 1, u128::MAX)
}

/// The hyperbolic cross `{ν : ∏(ν_j + 1) ≤ s + 1}` with the default size cap.
pub fn hyperbolic_cross(d: usize, s: usize) -> Result<MultiIndexSet> {
    hyperbolic_cross_capped(d, s, DEFAULT_HC_CAP)
}

pub fn hyperbolic_cross_capped(d: usize, s: usize, cap: usize) -> Result<MultiIndexSet> {
    if d == 0 || s == 0 {
        return Err(Error::invalid(format!("hyperbolic cross needs d >= 1 and s >= 1 (got d={d}, s={s})")));
    }
    let bound = s as u128 + 1;
    let n = count_hc(d, bound, cap as u128);
    if n > cap as u128 {
        return Err(Error::CapExceeded { what: "hyperbolic cross indices", required: n, cap: cap as u128 });
    }
    let mut out = Vec::with_capacity(n as usize);
    let mut current = vec![0u32; d];
    fill_hc(&mut current, 0, bound, &mut out);
    out.sort_unstable();
    Ok(MultiIndexSet::from_sorted(d, out))
}

fn fill_hc(current: &mut Vec<u32>, j: usize, bound: u128, out: &mut Vec<MultiIndex>) {
    if j == current.len() {
        out.push(MultiIndex(current.clone()));
        return;
    }
    let mut k = 0u32;
    while (k as u128 + 1) <= bound {
        current[j] = k;
        fill_hc(current, j + 1, bound / (k as u128 + 1), out);
        k += 1;
    }
    current[j] = 0;
}

/// Whether every index's componentwise predecessors are also members.
pub fn is_lower(set: &MultiIndexSet) -> bool {
    set.iter().all(|nu| (0..nu.dim()).all(|j| nu.predecessor(j).is_none_or(|p| set.contains(&p))))
}

/// Legendre weights `u_ν = ∏ √(2ν_j + 1) = ‖Ψ_ν‖_∞`.
pub fn legendre_weights(set: &MultiIndexSet) -> WeightVector {
    let values = set.iter().map(MultiIndex::legendre_weight).collect();
    WeightVector { set: set.clone(), values }
}

/// `Σ_{ν∈S} u_ν²`. Every member of `subset` must be indexed by `u`.
pub fn weighted_cardinality(subset: &MultiIndexSet, u: &WeightVector) -> Result<f64> {
    subset.iter().try_fold(0.0, |acc, nu| {
        u.get(nu)
            .map(|w| acc + w * w)
            .ok_or_else(|| Error::invalid(format!("weight vector has no entry for {nu}")))
    })
}

/// Limits for the exhaustive `K(s)` search.
#[derive(Debug, Clone, Copy)]
pub struct LowerSparsityLimits {
    pub max_s: usize,
    pub max_dim: usize,
    pub max_visits: u64,
}

impl Default for LowerSparsityLimits {
    fn default() -> Self {
        LowerSparsityLimits { max_s: 20, max_dim: 4, max_visits: 10_000_000 }
    }
}

/// Intrinsic lower sparsity `K(s)`: the largest Legendre-weighted cardinality
/// of a lower set with at most `s` elements.
pub fn intrinsic_lower_sparsity(d: usize, s: usize) -> Result<f64> {
    intrinsic_lower_sparsity_with(d, s, LowerSparsityLimits::default())
}

pub fn intrinsic_lower_sparsity_with(d: usize, s: usize, limits: LowerSparsityLimits) -> Result<f64> {
    if d == 0 || s == 0 {
        return Err(Error::invalid("K(s) needs d >= 1 and s >= 1"));
    }
    if s > limits.max_s {
        return Err(Error::CapExceeded { what: "K(s) sparsity", required: s as u128, cap: limits.max_s as u128 });
    }
    if d > limits.max_dim {
        return Err(Error::CapExceeded { what: "K(s) dimension", required: d as u128, cap: limits.max_dim as u128 });
    }
    // every lower set of size ≤ s lies in Λ^HC_s, so this is the largest single weight available
    let max_single = hyperbolic_cross(d, s)?.iter().map(MultiIndex::legendre_weight_sq).max().unwrap_or(1);
    let ceiling = (s as u128) * (s as u128);

    let mut best = 0u128;
    let mut search = LowerSetSearch::new(d, s, limits.max_visits);
    search.run(|members| {
        let weight: u128 = members.iter().map(MultiIndex::legendre_weight_sq).sum();
        best = best.max(weight);
        if best >= ceiling {
            return Visit::Stop;
        }
        let room = (s - members.len()) as u128;
        if weight + room * max_single <= best {
            Visit::Prune
        } else {
            Visit::Descend
        }
    })?;
    Ok(best as f64)
}

/// The three upper bounds on `|Λ^HC_s|`:
/// `2 s³ 4^d`, `e² s^{2 + log₂ d}`, and `s (ln s + d ln 2)^{d-1} / (d-1)!`.
pub fn hc_cardinality_bounds(d: usize, s: usize) -> [f64; 3] {
    let (df, sf) = (d as f64, s as f64);
    let b1 = 2.0 * sf.powi(3) * 4f64.powf(df);
    let b2 = std::f64::consts::E.powi(2) * sf.powf(2.0 + df.log2());
    let factorial: f64 = (1..d).map(|k| k as f64).product();
    let b3 = sf * (sf.ln() + df * std::f64::consts::LN_2).powi(d as i32 - 1) / factorial;
    [b1, b2, b3]
}

/// Result of searching for the degree whose hyperbolic cross has a given size.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DegreeMatch {
    pub degree: usize,
    pub cardinality: u128,
    pub exact: bool,
}

/// Linear scan over `s` for the hyperbolic cross closest in size to `target`.
pub fn degree_for_cardinality(d: usize, target: u128) -> DegreeMatch {
    let mut prev: Option<(usize, u128)> = None;
    let mut s = 1usize;
    loop {
        let n = hc_cardinality(d, s);
        if n == target {
            return DegreeMatch { degree: s, cardinality: n, exact: true };
        }
        if n > target {
            let (degree, cardinality) = match prev {
                Some((ps, pn)) if target - pn <= n - target => (ps, pn),
                _ => (s, n),
            };
            return DegreeMatch { degree, cardinality, exact: false };
        }
        prev = Some((s, n));
        s += 1;
    }
}
