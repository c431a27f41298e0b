//! Substructure search by backtracking over pattern atoms in BFS order.
//!
//! Matching is subgraph monomorphism: every pattern bond must exist in the
//! target, extra target bonds are allowed. Embeddings are collapsed to unique
//! target atom sets so automorphisms of the pattern count once.

use std::collections::HashSet;

use super::{BondOrder, Molecule};
use crate::error::{Error, Result};

pub const DEFAULT_MAX_HITS: usize = 10_000;

/// Pattern atom → target atom pairs, ordered by pattern atom index.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct AtomMapping {
    pub pairs: Vec<(usize, usize)>,
}

impl AtomMapping {
    pub fn target_atoms(&self) -> Vec<usize> {
        self.pairs.iter().map(|&(_, t)| t).collect()
    }

    /// Sorted target atoms; the identity used for de-duplication.
    pub fn atom_set(&self) -> Vec<usize> {
        let mut s = self.target_atoms();
        s.sort_unstable();
        s
    }
}

#[derive(Debug, Clone, Copy)]
pub struct MatchOptions {
    pub bond_orders: bool,
    pub aromaticity: bool,
}

impl Default for MatchOptions {
    fn default() -> Self {
        MatchOptions {
            bond_orders: true,
            aromaticity: true,
        }
    }
}

impl MatchOptions {
    /// Element and connectivity only; used to align graphs read from
    /// different sources (e.g. a SMILES and a Kekulé connection table).
    pub fn topology_only() -> Self {
        MatchOptions {
            bond_orders: false,
            aromaticity: false,
        }
    }
}

/// All embeddings of `pattern` in `target`, one per unique target atom set,
/// in lexicographic order of the mapping vector. Each set is represented by
/// its lexicographically smallest mapping.
pub fn find_substructure(pattern: &Molecule, target: &Molecule, max_hits: usize) -> Result<Vec<AtomMapping>> {
    find_substructure_with(pattern, target, max_hits, MatchOptions::default())
}

pub fn find_substructure_with(
    pattern: &Molecule,
    target: &Molecule,
    max_hits: usize,
    options: MatchOptions,
) -> Result<Vec<AtomMapping>> {
    if pattern.is_empty() || pattern.atom_count() > target.atom_count() {
        return Ok(Vec::new());
    }
    let mut matcher = Matcher::new(pattern, target, options);
    let mut raw: Vec<Vec<usize>> = Vec::new();
    let mut sets: HashSet<Vec<usize>> = HashSet::new();
    let mut overflow = false;
    matcher.search(&mut |mapping| {
        let mut set = mapping.to_vec();
        set.sort_unstable();
        if sets.insert(set) && sets.len() > max_hits {
            overflow = true;
            return false;
        }
        raw.push(mapping.to_vec());
        true
    });
    if overflow {
        return Err(Error::HitLimitExceeded { limit: max_hits });
    }
    raw.sort_unstable();
    let mut seen = HashSet::new();
    Ok(raw
        .into_iter()
        .filter(|m| {
            let mut set = m.clone();
            set.sort_unstable();
            seen.insert(set)
        })
        .map(|m| AtomMapping {
            pairs: m.into_iter().enumerate().collect(),
        })
        .collect())
}

/// True when at least one embedding exists; stops at the first hit.
pub fn contains_substructure(pattern: &Molecule, target: &Molecule) -> bool {
    if pattern.is_empty() {
        return true;
    }
    if pattern.atom_count() > target.atom_count() {
        return false;
    }
    let mut found = false;
    Matcher::new(pattern, target, MatchOptions::default()).search(&mut |_| {
        found = true;
        false
    });
    found
}

struct Matcher<'a> {
    pattern: &'a Molecule,
    target: &'a Molecule,
    options: MatchOptions,
    /// Pattern atoms in visiting order with the already-placed neighbour
    /// used to generate candidates.
    plan: Vec<(usize, Option<usize>)>,
    map: Vec<usize>,
    used: Vec<bool>,
}

const UNMAPPED: usize = usize::MAX;

impl<'a> Matcher<'a> {
    fn new(pattern: &'a Molecule, target: &'a Molecule, options: MatchOptions) -> Self {
        let n = pattern.atom_count();
        let mut plan = Vec::with_capacity(n);
        let mut placed = vec![false; n];
        for root in 0..n {
            if placed[root] {
                continue;
            }
            placed[root] = true;
            plan.push((root, None));
            let mut head = plan.len() - 1;
            while head < plan.len() {
                let v = plan[head].0;
                head += 1;
                for &(w, _) in pattern.neighbors(v) {
                    if !placed[w] {
                        placed[w] = true;
                        plan.push((w, Some(v)));
                    }
                }
            }
        }
        Matcher {
            pattern,
            target,
            options,
            plan,
            map: vec![UNMAPPED; n],
            used: vec![false; target.atom_count()],
        }
    }

    fn atom_ok(&self, p: usize, t: usize) -> bool {
        let pa = self.pattern.atom(p);
        if pa.is_wildcard() {
            return true;
        }
        let ta = self.target.atom(t);
        pa.element == ta.element
            && (!self.options.aromaticity || pa.aromatic == ta.aromatic)
            && self.pattern.degree(p) <= self.target.degree(t)
    }

    fn bonds_ok(&self, p: usize, t: usize) -> bool {
        self.pattern.neighbors(p).iter().all(|&(pw, pb)| {
            let tw = self.map[pw];
            if tw == UNMAPPED {
                return true;
            }
            match self.target.bond_between(t, tw) {
                None => false,
                Some(tb) => !self.options.bond_orders || orders_match(self.pattern.bond(pb).order, tb.order),
            }
        })
    }

    /// Calls `visit` for each complete mapping (indexed by pattern atom);
    /// stops when it returns false.
    fn search(&mut self, visit: &mut dyn FnMut(&[usize]) -> bool) {
        self.step(0, visit);
    }

    fn step(&mut self, depth: usize, visit: &mut dyn FnMut(&[usize]) -> bool) -> bool {
        if depth == self.plan.len() {
            return visit(&self.map);
        }
        let (p, anchor) = self.plan[depth];
        let candidates: Vec<usize> = match anchor {
            Some(a) => {
                let mut c: Vec<usize> = self.target.neighbors(self.map[a]).iter().map(|&(w, _)| w).collect();
                c.sort_unstable();
                c
            }
            None => (0..self.target.atom_count()).collect(),
        };
        for t in candidates {
            if self.used[t] || !self.atom_ok(p, t) || !self.bonds_ok(p, t) {
                continue;
            }
            self.map[p] = t;
            self.used[t] = true;
            let go_on = self.step(depth + 1, visit);
            self.map[p] = UNMAPPED;
            self.used[t] = false;
            if !go_on {
                return false;
            }
        }
        true
    }
}

fn orders_match(pattern: BondOrder, target: BondOrder) -> bool {
    pattern == target
}
