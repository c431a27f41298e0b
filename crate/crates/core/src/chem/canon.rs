//! Canonical SMILES.
//!
//! Atoms are ranked by iterative neighbourhood refinement. While a rank class
//! holds more than one atom, each member is individualized in turn and the
//! refinement repeated; every discrete ranking is written out as SMILES and
//! the lexicographically smallest string wins. Ties left by refinement are
//! almost always automorphisms, so the search tree stays small.

use std::collections::BTreeMap;
use std::fmt::Write;

use super::smiles::implicit_hydrogens;
use super::{BondOrder, Molecule};

/// Leaves explored before the search settles for the best string so far.
const MAX_LEAVES: usize = 20_000;

/// Deterministic identity string, equal for isomorphic molecules.
pub fn canonical_key(m: &Molecule) -> String {
    canonical_smiles(m)
}

/// Canonical SMILES; components are canonicalized separately and joined
/// with `.` in sorted order.
pub fn canonical_smiles(m: &Molecule) -> String {
    if m.is_empty() {
        return String::new();
    }
    let mut parts: Vec<String> = m
        .components()
        .into_iter()
        .map(|comp| {
            let (sub, _) = m.induced_subgraph(&comp);
            canonical_component(&sub)
        })
        .collect();
    parts.sort();
    parts.join(".")
}

fn canonical_component(m: &Molecule) -> String {
    let ring_atoms = m.ring_atoms();
    let initial: Vec<_> = (0..m.atom_count())
        .map(|i| {
            let a = m.atom(i);
            (
                a.element.atomic_number(),
                a.aromatic,
                a.charge,
                a.hydrogens,
                m.degree(i),
                ring_atoms[i],
            )
        })
        .collect();
    let ranks = refine(m, dense_ranks(&initial));
    let mut search = Search {
        mol: m,
        best: None,
        leaves: 0,
    };
    search.explore(ranks);
    search.best.expect("at least one leaf is visited")
}

struct Search<'a> {
    mol: &'a Molecule,
    best: Option<String>,
    leaves: usize,
}

impl Search<'_> {
    fn explore(&mut self, ranks: Vec<usize>) {
        if self.leaves >= MAX_LEAVES {
            return;
        }
        let Some(class) = first_tied_class(&ranks) else {
            self.leaves += 1;
            let s = write_smiles(self.mol, &ranks);
            if self.best.as_ref().is_none_or(|b| s < *b) {
                self.best = Some(s);
            }
            return;
        };
        for &atom in &class {
            let split: Vec<(usize, bool)> = ranks.iter().enumerate().map(|(i, &r)| (r, !(i == atom))).collect();
            self.explore(refine(self.mol, dense_ranks(&split)));
        }
    }
}

/// Atoms of the lowest-ranked class with more than one member.
fn first_tied_class(ranks: &[usize]) -> Option<Vec<usize>> {
    let mut counts = vec![0usize; ranks.len()];
    for &r in ranks {
        counts[r] += 1;
    }
    let r = counts.iter().position(|&c| c > 1)?;
    Some((0..ranks.len()).filter(|&i| ranks[i] == r).collect())
}

/// Maps arbitrary ordered invariants to dense ranks 0..k.
fn dense_ranks<T: Ord + Clone>(inv: &[T]) -> Vec<usize> {
    let mut sorted: Vec<T> = inv.to_vec();
    sorted.sort();
    sorted.dedup();
    inv.iter()
        .map(|v| sorted.binary_search(v).expect("value present"))
        .collect()
}

fn refine(m: &Molecule, mut ranks: Vec<usize>) -> Vec<usize> {
    let mut classes = count_classes(&ranks);
    loop {
        let inv: Vec<(usize, Vec<(usize, u8)>)> = (0..m.atom_count())
            .map(|i| {
                let mut nb: Vec<(usize, u8)> = m
                    .neighbors(i)
                    .iter()
                    .map(|&(w, b)| (ranks[w], m.bond(b).order.code()))
                    .collect();
                nb.sort_unstable();
                (ranks[i], nb)
            })
            .collect();
        let next = dense_ranks(&inv);
        let next_classes = count_classes(&next);
        ranks = next;
        if next_classes == classes {
            return ranks;
        }
        classes = next_classes;
    }
}

fn count_classes(ranks: &[usize]) -> usize {
    ranks.iter().copied().max().map_or(0, |m| m + 1)
}

/// Writes a single connected component with the given discrete ranking.
fn write_smiles(m: &Molecule, ranks: &[usize]) -> String {
    let n = m.atom_count();
    let start = (0..n).min_by_key(|&i| ranks[i]).expect("non-empty");
    let sorted_neighbors = |v: usize| -> Vec<(usize, usize)> {
        let mut nb = m.neighbors(v).to_vec();
        nb.sort_by_key(|&(w, _)| ranks[w]);
        nb
    };

    // Pass 1: DFS to classify tree bonds and ring-closure bonds.
    let mut order = vec![usize::MAX; n];
    let mut visited = 0usize;
    let mut closure = vec![false; m.bonds().len()];
    let mut children: Vec<Vec<(usize, usize)>> = vec![Vec::new(); n];
    let mut stack = vec![(start, usize::MAX, 0usize)];
    let mut nbs: Vec<Vec<(usize, usize)>> = (0..n).map(sorted_neighbors).collect();
    order[start] = visited;
    visited += 1;
    while let Some(&mut (v, parent_bond, ref mut cursor)) = stack.last_mut() {
        if *cursor >= nbs[v].len() {
            stack.pop();
            continue;
        }
        let (w, b) = nbs[v][*cursor];
        *cursor += 1;
        if b == parent_bond || closure[b] {
            continue;
        }
        if order[w] != usize::MAX {
            closure[b] = true;
        } else {
            order[w] = visited;
            visited += 1;
            children[v].push((w, b));
            stack.push((w, b, 0));
        }
    }
    nbs.clear();

    // Ring bonds per atom: (partner, bond) split into closings and openings.
    let mut ring_at: Vec<Vec<(usize, usize)>> = vec![Vec::new(); n];
    for (b, bond) in m.bonds().iter().enumerate() {
        if closure[b] {
            ring_at[bond.a].push((bond.b, b));
            ring_at[bond.b].push((bond.a, b));
        }
    }

    let mut out = String::new();
    let mut digit_of: BTreeMap<usize, u32> = BTreeMap::new();
    let mut free: Vec<bool> = vec![true; 100];
    free[0] = false;
    // Pass 2: emit. Explicit stack of work items to avoid deep recursion.
    enum Item {
        Atom(usize, Option<usize>),
        Open,
        Close,
    }
    let mut work = vec![Item::Atom(start, None)];
    while let Some(item) = work.pop() {
        match item {
            Item::Open => out.push('('),
            Item::Close => out.push(')'),
            Item::Atom(v, via) => {
                if let Some(b) = via {
                    out.push_str(bond_symbol(m, b));
                }
                write_atom(m, v, &mut out);
                let mut rings = ring_at[v].clone();
                // closings first (partner already written), then openings, by partner rank
                rings.sort_by_key(|&(w, _)| (order[w] > order[v], ranks[w]));
                for (w, b) in rings {
                    if order[w] < order[v] {
                        let d = digit_of.remove(&b).expect("ring opened earlier");
                        free[d as usize] = true;
                        write_ring_digit(&mut out, d);
                    } else {
                        let d = (1..100).find(|&d| free[d]).expect("fewer than 99 open rings") as u32;
                        free[d as usize] = false;
                        digit_of.insert(b, d);
                        out.push_str(bond_symbol(m, b));
                        write_ring_digit(&mut out, d);
                    }
                }
                let kids = &children[v];
                for (k, &(w, b)) in kids.iter().enumerate().rev() {
                    if k + 1 == kids.len() {
                        work.push(Item::Atom(w, Some(b)));
                    } else {
                        work.push(Item::Close);
                        work.push(Item::Atom(w, Some(b)));
                        work.push(Item::Open);
                    }
                }
            }
        }
    }
    out
}

fn write_ring_digit(out: &mut String, d: u32) {
    if d < 10 {
        let _ = write!(out, "{d}");
    } else {
        let _ = write!(out, "%{d:02}");
    }
}

fn bond_symbol(m: &Molecule, b: usize) -> &'static str {
    let bond = m.bond(b);
    match bond.order {
        BondOrder::Single if m.atom(bond.a).aromatic && m.atom(bond.b).aromatic => "-",
        BondOrder::Single | BondOrder::Aromatic => "",
        BondOrder::Double => "=",
        BondOrder::Triple => "#",
    }
}

fn write_atom(m: &Molecule, v: usize, out: &mut String) {
    let atom = m.atom(v);
    let symbol = atom.element.symbol();
    let written = if atom.aromatic {
        symbol.to_ascii_lowercase()
    } else {
        symbol.to_string()
    };
    if atom.is_wildcard() && atom.charge == 0 && atom.hydrogens == 0 {
        out.push('*');
        return;
    }
    let bare = atom.element.is_organic_subset()
        && atom.charge == 0
        && implicit_hydrogens(atom.element, atom.aromatic, m.bond_valence(v)) == Some(atom.hydrogens);
    if bare {
        out.push_str(&written);
        return;
    }
    out.push('[');
    out.push_str(&written);
    match atom.hydrogens {
        0 => {}
        1 => out.push('H'),
        h => {
            let _ = write!(out, "H{h}");
        }
    }
    match atom.charge {
        0 => {}
        1 => out.push('+'),
        -1 => out.push('-'),
        c if c > 0 => {
            let _ = write!(out, "+{c}");
        }
        c => {
            let _ = write!(out, "-{}", -c);
        }
    }
    out.push(']');
}
