//! Duplicate-free enumeration of lower (downward-closed) multi-index sets.
//!
//! Uses reverse search: the parent of a nonempty lower set is obtained by
//! removing its canonically largest maximal element. Children of `S` are the
//! sets `S ∪ {ν}` for addable `ν` that become the largest maximal element, so
//! each lower set is produced exactly once and callers can prune subtrees.

use std::collections::HashSet;

use crate::error::{Error, Result};
use crate::multiindex::MultiIndex;

/// What the search does after visiting a set.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Visit {
    /// Explore supersets of the current set.
    Descend,
    /// Skip supersets of the current set.
    Prune,
    /// End the whole search.
    Stop,
}

pub struct LowerSetSearch {
    dim: usize,
    max_size: usize,
    max_visits: u64,
    visited: u64,
    members: Vec<MultiIndex>,
    lookup: HashSet<MultiIndex>,
}

impl LowerSetSearch {
    pub fn new(dim: usize, max_size: usize, max_visits: u64) -> Self {
        LowerSetSearch { dim, max_size, max_visits, visited: 0, members: Vec::new(), lookup: HashSet::new() }
    }

    pub fn visited(&self) -> u64 {
        self.visited
    }

    /// Visits every nonempty lower set with at most `max_size` members
    /// (subject to pruning). Members are passed in insertion order.
    pub fn run<F>(&mut self, mut visit: F) -> Result<()>
    where
        F: FnMut(&[MultiIndex]) -> Visit,
    {
        if self.max_size == 0 {
            return Ok(());
        }
        self.members.clear();
        self.lookup.clear();
        self.visited = 0;
        self.push(MultiIndex::zero(self.dim));
        let _ = self.explore(&mut visit)?;
        Ok(())
    }

    fn push(&mut self, nu: MultiIndex) {
        self.lookup.insert(nu.clone());
        self.members.push(nu);
    }

    fn pop(&mut self) {
        if let Some(nu) = self.members.pop() {
            self.lookup.remove(&nu);
        }
    }

    // returns false when the search must stop
    fn explore<F>(&mut self, visit: &mut F) -> Result<bool>
    where
        F: FnMut(&[MultiIndex]) -> Visit,
    {
        self.visited += 1;
        if self.visited > self.max_visits {
            return Err(Error::SearchBudgetExceeded { visited: self.visited });
        }
        match visit(&self.members) {
            Visit::Stop => return Ok(false),
            Visit::Prune => return Ok(true),
            Visit::Descend => {}
        }
        if self.members.len() >= self.max_size {
            return Ok(true);
        }
        for child in self.children() {
            self.push(child);
            let keep_going = self.explore(visit)?;
            self.pop();
            if !keep_going {
                return Ok(false);
            }
        }
        Ok(true)
    }

    fn is_addable(&self, nu: &MultiIndex) -> bool {
        !self.lookup.contains(nu)
            && (0..self.dim).all(|j| nu.predecessor(j).is_none_or(|p| self.lookup.contains(&p)))
    }

    fn children(&self) -> Vec<MultiIndex> {
        let mut candidates: Vec<MultiIndex> = self
            .members
            .iter()
            .flat_map(|mu| (0..self.dim).map(move |j| mu.successor(j)))
            .filter(|nu| self.is_addable(nu))
            .collect();
        candidates.sort_unstable();
        candidates.dedup();
        candidates.retain(|nu| self.is_canonical_extension(nu));
        candidates
    }

    /// `nu` must exceed every other maximal element of `S ∪ {nu}`.
    fn is_canonical_extension(&self, nu: &MultiIndex) -> bool {
        self.members.iter().all(|mu| {
            let maximal_after = (0..self.dim).all(|j| {
                let up = mu.successor(j);
                !self.lookup.contains(&up) && &up != nu
            });
            !maximal_after || mu < nu
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::multiindex::{hyperbolic_cross, is_lower, MultiIndexSet};
    use std::collections::BTreeSet;

    fn enumerate(dim: usize, max_size: usize) -> Vec<Vec<MultiIndex>> {
        let mut out = Vec::new();
        LowerSetSearch::new(dim, max_size, u64::MAX)
            .run(|m| {
                let mut v = m.to_vec();
                v.sort();
                out.push(v);
                Visit::Descend
            })
            .unwrap();
        out
    }

    fn brute(dim: usize, max_size: usize) -> BTreeSet<Vec<MultiIndex>> {
        let hc = hyperbolic_cross(dim, max_size).unwrap();
        let n = hc.len();
        let mut out = BTreeSet::new();
        for mask in 1u32..(1 << n) {
            if mask.count_ones() as usize > max_size {
                continue;
            }
            let v: Vec<MultiIndex> = (0..n).filter(|i| mask >> i & 1 == 1).map(|i| hc.indices()[i].clone()).collect();
            if is_lower(&MultiIndexSet::new(dim, v.clone()).unwrap()) {
                out.insert(v);
            }
        }
        out
    }

    #[test]
    fn enumeration_is_complete_and_unique() {
        for (dim, size) in [(1, 6), (2, 5), (3, 4), (2, 6)] {
            let got = enumerate(dim, size);
            let unique: BTreeSet<_> = got.iter().cloned().collect();
            assert_eq!(unique.len(), got.len(), "duplicates for d={dim} s={size}");
            assert_eq!(unique, brute(dim, size), "d={dim} s={size}");
        }
    }

    #[test]
    fn plane_partition_counts() {
        // lower sets of size n in N^3 are counted by plane partitions: 1, 3, 6, 13, 24, 48
        let sets = enumerate(3, 6);
        let mut counts = [0usize; 7];
        for s in &sets {
            counts[s.len()] += 1;
        }
        assert_eq!(&counts[1..], &[1, 3, 6, 13, 24, 48]);
    }

    #[test]
    fn budget_is_enforced() {
        let err = LowerSetSearch::new(2, 10, 5).run(|_| Visit::Descend).unwrap_err();
        assert!(matches!(err, Error::SearchBudgetExceeded { .. }));
    }
}
