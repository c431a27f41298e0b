//! Hydrogen-suppressed molecular graphs.
//!
//! Molecules come from SMILES ([`parse_smiles`]) or from V2000 connection
//! tables (see `structval`). Hydrogens are folded into their heavy atom's
//! `hydrogens` count; the graph only holds heavy atoms (plus `*` wildcards in
//! query patterns).

mod canon;
mod descriptors;
mod element;
mod smiles;
mod substructure;

use std::collections::{BTreeSet, VecDeque};

pub use canon::{canonical_key, canonical_smiles};
pub use descriptors::{descriptors, rule_of_three, DescriptorSet, DescriptorTable, ExternalDescriptors};
pub use element::Element;
pub use smiles::parse_smiles;
pub use substructure::{
    contains_substructure, find_substructure, find_substructure_with, AtomMapping, MatchOptions, DEFAULT_MAX_HITS,
};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum BondOrder {
    Single,
    Double,
    Triple,
    Aromatic,
}

impl BondOrder {
    /// Small integer code used in canonical invariants and binary formats.
    pub fn code(self) -> u8 {
        match self {
            BondOrder::Single => 1,
            BondOrder::Double => 2,
            BondOrder::Triple => 3,
            BondOrder::Aromatic => 4,
        }
    }

    /// Contribution to the valence sum. Aromatic bonds count one; the extra
    /// pi electron is accounted per atom.
    pub(crate) fn valence(self) -> u32 {
        match self {
            BondOrder::Single | BondOrder::Aromatic => 1,
            BondOrder::Double => 2,
            BondOrder::Triple => 3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Atom {
    pub element: Element,
    pub charge: i8,
    pub aromatic: bool,
    pub hydrogens: u8,
}

impl Atom {
    pub fn new(element: Element) -> Self {
        Atom {
            element,
            charge: 0,
            aromatic: false,
            hydrogens: 0,
        }
    }

    pub fn is_wildcard(&self) -> bool {
        self.element.is_wildcard()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Bond {
    pub a: usize,
    pub b: usize,
    pub order: BondOrder,
}

impl Bond {
    pub fn other(&self, atom: usize) -> usize {
        if self.a == atom {
            self.b
        } else {
            self.a
        }
    }
}

#[derive(Debug, Clone)]
pub struct Molecule {
    atoms: Vec<Atom>,
    bonds: Vec<Bond>,
    adjacency: Vec<Vec<(usize, usize)>>,
    source: String,
}

impl PartialEq for Molecule {
    fn eq(&self, other: &Self) -> bool {
        self.atoms == other.atoms && self.bonds == other.bonds
    }
}

impl Molecule {
    /// Builds a molecule, checking the graph invariants.
    pub fn new(atoms: Vec<Atom>, bonds: Vec<Bond>, source: impl Into<String>) -> Result<Self> {
        let n = atoms.len();
        let mut adjacency = vec![Vec::new(); n];
        let mut seen = BTreeSet::new();
        for (i, bond) in bonds.iter().enumerate() {
            if bond.a >= n || bond.b >= n {
                return Err(Error::InvalidMolecule(format!(
                    "bond {i} references atom outside 0..{n}"
                )));
            }
            if bond.a == bond.b {
                return Err(Error::InvalidMolecule(format!("bond {i} is a self-loop")));
            }
            let key = (bond.a.min(bond.b), bond.a.max(bond.b));
            if !seen.insert(key) {
                return Err(Error::InvalidMolecule(format!(
                    "duplicate bond between atoms {} and {}",
                    key.0, key.1
                )));
            }
            let aromatic_ok = |i: usize| atoms[i].aromatic || atoms[i].is_wildcard();
            if bond.order == BondOrder::Aromatic && !(aromatic_ok(bond.a) && aromatic_ok(bond.b)) {
                return Err(Error::InvalidMolecule(format!(
                    "aromatic bond {i} joins a non-aromatic atom"
                )));
            }
            adjacency[bond.a].push((bond.b, i));
            adjacency[bond.b].push((bond.a, i));
        }
        Ok(Molecule {
            atoms,
            bonds,
            adjacency,
            source: source.into(),
        })
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    pub fn bonds(&self) -> &[Bond] {
        &self.bonds
    }

    pub fn atom(&self, i: usize) -> &Atom {
        &self.atoms[i]
    }

    pub fn bond(&self, i: usize) -> &Bond {
        &self.bonds[i]
    }

    /// Original text the molecule was parsed from (empty for derived graphs).
    pub fn source_text(&self) -> &str {
        &self.source
    }

    pub fn atom_count(&self) -> usize {
        self.atoms.len()
    }

    pub fn heavy_atom_count(&self) -> usize {
        self.atoms.iter().filter(|a| !a.is_wildcard()).count()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    /// `(neighbor, bond index)` pairs of atom `i`.
    pub fn neighbors(&self, i: usize) -> &[(usize, usize)] {
        &self.adjacency[i]
    }

    pub fn degree(&self, i: usize) -> usize {
        self.adjacency[i].len()
    }

    pub fn bond_between(&self, i: usize, j: usize) -> Option<&Bond> {
        self.adjacency[i]
            .iter()
            .find(|&&(nb, _)| nb == j)
            .map(|&(_, b)| &self.bonds[b])
    }

    /// Per-bond flag: `true` when the bond lies on a ring (is not a bridge).
    pub fn ring_bonds(&self) -> Vec<bool> {
        // Bridges via iterative Tarjan low-link.
        let n = self.atoms.len();
        let mut in_ring = vec![true; self.bonds.len()];
        let mut disc = vec![usize::MAX; n];
        let mut low = vec![0usize; n];
        let mut timer = 0;
        for root in 0..n {
            if disc[root] != usize::MAX {
                continue;
            }
            // (atom, parent bond, next neighbor cursor)
            let mut stack: Vec<(usize, Option<usize>, usize)> = vec![(root, None, 0)];
            disc[root] = timer;
            low[root] = timer;
            timer += 1;
            while let Some(&mut (v, parent_bond, ref mut cursor)) = stack.last_mut() {
                if *cursor < self.adjacency[v].len() {
                    let (w, b) = self.adjacency[v][*cursor];
                    *cursor += 1;
                    if Some(b) == parent_bond {
                        continue;
                    }
                    if disc[w] == usize::MAX {
                        disc[w] = timer;
                        low[w] = timer;
                        timer += 1;
                        stack.push((w, Some(b), 0));
                    } else {
                        low[v] = low[v].min(disc[w]);
                    }
                } else {
                    stack.pop();
                    if let (Some(b), Some(&(u, _, _))) = (parent_bond, stack.last()) {
                        low[u] = low[u].min(low[v]);
                        if low[v] > disc[u] {
                            in_ring[b] = false;
                        }
                    }
                }
            }
        }
        in_ring
    }

    /// Per-atom flag: `true` when the atom belongs to at least one ring.
    pub fn ring_atoms(&self) -> Vec<bool> {
        let ring = self.ring_bonds();
        let mut atoms = vec![false; self.atoms.len()];
        for (bond, &r) in self.bonds.iter().zip(&ring) {
            if r {
                atoms[bond.a] = true;
                atoms[bond.b] = true;
            }
        }
        atoms
    }

    /// Connected components as sorted atom index lists, ordered by first atom.
    pub fn components(&self) -> Vec<Vec<usize>> {
        let n = self.atoms.len();
        let mut seen = vec![false; n];
        let mut out = Vec::new();
        for start in 0..n {
            if seen[start] {
                continue;
            }
            let mut comp = Vec::new();
            let mut queue = VecDeque::from([start]);
            seen[start] = true;
            while let Some(v) = queue.pop_front() {
                comp.push(v);
                for &(w, _) in &self.adjacency[v] {
                    if !seen[w] {
                        seen[w] = true;
                        queue.push_back(w);
                    }
                }
            }
            comp.sort_unstable();
            out.push(comp);
        }
        out
    }

    /// Splits a multi-component molecule (`A.B`) into its connected parts.
    pub fn split_components(&self) -> Vec<Molecule> {
        self.components()
            .into_iter()
            .map(|c| self.induced_subgraph(&c).0)
            .collect()
    }

    /// Subgraph induced by `atoms` (kept in the given order). Returns the new
    /// molecule and, for each new atom, its index in `self`.
    pub fn induced_subgraph(&self, atoms: &[usize]) -> (Molecule, Vec<usize>) {
        let mut remap = vec![usize::MAX; self.atoms.len()];
        for (new, &old) in atoms.iter().enumerate() {
            remap[old] = new;
        }
        let new_atoms = atoms.iter().map(|&i| self.atoms[i].clone()).collect();
        let new_bonds = self
            .bonds
            .iter()
            .filter(|b| remap[b.a] != usize::MAX && remap[b.b] != usize::MAX)
            .map(|b| Bond {
                a: remap[b.a],
                b: remap[b.b],
                order: b.order,
            })
            .collect();
        let mol =
            Molecule::new(new_atoms, new_bonds, String::new()).expect("induced subgraph of a valid molecule is valid");
        (mol, atoms.to_vec())
    }

    /// Sum of bond valence contributions at atom `i`.
    pub(crate) fn bond_valence(&self, i: usize) -> u32 {
        self.adjacency[i]
            .iter()
            .map(|&(_, b)| self.bonds[b].order.valence())
            .sum()
    }

    /// Sets each atom's hydrogen count from its standard (charge-adjusted)
    /// valence. Used for graphs that do not carry hydrogen counts, such as
    /// connection tables with hydrogens stripped.
    pub fn fill_hydrogens(&mut self) -> Result<()> {
        for i in 0..self.atoms.len() {
            let atom = &self.atoms[i];
            if atom.is_wildcard() {
                continue;
            }
            let valence = self.bond_valence(i);
            let Some(allowed) = atom.element.charged_valences(atom.charge) else {
                self.atoms[i].hydrogens = 0;
                continue;
            };
            let h = if atom.aromatic {
                allowed[0].saturating_sub(valence + 1)
            } else {
                match allowed.iter().find(|&&v| v >= valence) {
                    Some(&v) => v - valence,
                    None => {
                        return Err(Error::Valence {
                            atom: i,
                            symbol: atom.element.symbol().to_string(),
                            msg: format!("bond order sum {valence} exceeds standard valence"),
                        })
                    }
                }
            };
            self.atoms[i].hydrogens = h as u8;
        }
        Ok(())
    }

    /// True for the C–N single bond of an amide (carbon also double-bonded to O).
    pub fn is_amide_cn(&self, bond: usize) -> bool {
        let b = &self.bonds[bond];
        if b.order != BondOrder::Single {
            return false;
        }
        let (c, n) = match (self.atoms[b.a].element, self.atoms[b.b].element) {
            (Element::C, Element::N) => (b.a, b.b),
            (Element::N, Element::C) => (b.b, b.a),
            _ => return false,
        };
        let _ = n;
        !self.atoms[c].aromatic
            && self.adjacency[c]
                .iter()
                .any(|&(w, bi)| self.bonds[bi].order == BondOrder::Double && self.atoms[w].element == Element::O)
    }

    /// Returns a copy with atoms reordered so that new atom `k` is old atom
    /// `order[k]`.
    pub fn permuted(&self, order: &[usize]) -> Molecule {
        assert_eq!(order.len(), self.atoms.len());
        let (mut m, _) = self.induced_subgraph(order);
        m.source = self.source.clone();
        m
    }
}
