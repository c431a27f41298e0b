use std::collections::BTreeMap;

use rand::seq::IndexedRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use pwrules::chem::{Atom, AtomMapping, Bond, BondOrder, Element, Molecule};

fn max_valence(e: Element) -> usize {
    match e {
        Element::C => 4,
        Element::N => 3,
        Element::O | Element::S => 2,
        _ => 1,
    }
}

/// Random connected, valence-correct molecule with `1..=max_heavy` atoms.
/// About a third contain an aromatic six-ring (benzene or pyridine).
pub fn random_molecule(rng: &mut ChaCha8Rng, max_heavy: usize) -> Molecule {
    let n = rng.random_range(1..=max_heavy);
    let mut atoms: Vec<Atom> = Vec::new();
    let mut bonds: Vec<Bond> = Vec::new();
    let mut free: Vec<usize> = Vec::new();
    if n >= 6 && rng.random_bool(0.35) {
        for i in 0..6 {
            let e = if i == 0 && rng.random_bool(0.3) {
                Element::N
            } else {
                Element::C
            };
            let mut a = Atom::new(e);
            a.aromatic = true;
            atoms.push(a);
            free.push(if e == Element::C { 1 } else { 0 });
            bonds.push(Bond {
                a: i,
                b: (i + 1) % 6,
                order: BondOrder::Aromatic,
            });
        }
    }
    let pool = [
        Element::C,
        Element::C,
        Element::C,
        Element::N,
        Element::O,
        Element::S,
        Element::CL,
    ];
    while atoms.len() < n {
        let open: Vec<usize> = (0..atoms.len()).filter(|&i| free[i] > 0).collect();
        let e = *pool.choose(rng).unwrap();
        let idx = atoms.len();
        if atoms.is_empty() {
            atoms.push(Atom::new(e));
            free.push(max_valence(e));
            continue;
        }
        let Some(&anchor) = open.choose(rng) else { break };
        let mut order = BondOrder::Single;
        let room = free[anchor].min(max_valence(e));
        if !atoms[anchor].aromatic && room >= 2 && rng.random_bool(0.2) {
            order = if room >= 3 && rng.random_bool(0.2) {
                BondOrder::Triple
            } else {
                BondOrder::Double
            };
        }
        let used = order.code() as usize;
        atoms.push(Atom::new(e));
        free.push(max_valence(e) - used);
        free[anchor] -= used;
        bonds.push(Bond {
            a: anchor,
            b: idx,
            order,
        });
    }
    for _ in 0..rng.random_range(0..=2) {
        let open: Vec<usize> = (0..atoms.len()).filter(|&i| free[i] > 0).collect();
        if open.len() < 2 {
            break;
        }
        let a = *open.choose(rng).unwrap();
        let b = *open.choose(rng).unwrap();
        if a == b || bonds.iter().any(|x| (x.a == a && x.b == b) || (x.a == b && x.b == a)) {
            continue;
        }
        free[a] -= 1;
        free[b] -= 1;
        bonds.push(Bond {
            a,
            b,
            order: BondOrder::Single,
        });
    }
    let mut m = Molecule::new(atoms, bonds, "").expect("generator builds valid graphs");
    m.fill_hydrogens().expect("generator respects valence");
    m
}

/// Random connected subgraph of `m` with at most `max_atoms` atoms.
pub fn random_subgraph(m: &Molecule, max_atoms: usize, rng: &mut ChaCha8Rng) -> Molecule {
    let target = rng.random_range(1..=max_atoms.min(m.atom_count()));
    let mut chosen = vec![rng.random_range(0..m.atom_count())];
    while chosen.len() < target {
        let frontier: Vec<usize> = chosen
            .iter()
            .flat_map(|&v| m.neighbors(v).iter().map(|&(w, _)| w))
            .filter(|w| !chosen.contains(w))
            .collect();
        match frontier.choose(rng) {
            Some(&w) => chosen.push(w),
            None => break,
        }
    }
    chosen.sort_unstable();
    let (mut sub, _) = m.induced_subgraph(&chosen);
    // drop a random subset of non-bridge-free bonds is not needed; the
    // induced subgraph is already a valid pattern
    let _ = sub.fill_hydrogens();
    sub
}

fn atom_compatible(p: &Atom, t: &Atom) -> bool {
    p.is_wildcard() || (p.element == t.element && p.aromatic == t.aromatic)
}

/// Every injective, label-compatible map from pattern atoms to target atoms
/// whose image preserves every pattern bond with the same order. Partial
/// maps are extended one pattern atom at a time in index order. Returns,
/// per unique target atom set, its lexicographically smallest mapping,
/// sorted lexicographically.
pub fn brute_force_embeddings(pattern: &Molecule, target: &Molecule) -> Vec<Vec<usize>> {
    let np = pattern.atom_count();
    let nt = target.atom_count();
    let mut best: BTreeMap<Vec<usize>, Vec<usize>> = BTreeMap::new();
    if np == 0 || np > nt {
        return Vec::new();
    }
    let mut map = vec![usize::MAX; np];
    let mut used = vec![false; nt];
    fn rec(
        k: usize,
        p: &Molecule,
        t: &Molecule,
        map: &mut Vec<usize>,
        used: &mut Vec<bool>,
        best: &mut BTreeMap<Vec<usize>, Vec<usize>>,
    ) {
        if k == map.len() {
            let mut set = map.clone();
            set.sort_unstable();
            let e = best.entry(set).or_insert_with(|| map.clone());
            if *map < *e {
                *e = map.clone();
            }
            return;
        }
        for c in 0..t.atom_count() {
            if used[c] || !atom_compatible(p.atom(k), t.atom(c)) {
                continue;
            }
            // every pattern bond back to an already placed atom must exist
            // in the target with the same order
            let bonds_ok = p
                .neighbors(k)
                .iter()
                .all(|&(j, b)| j > k || t.bond_between(map[j], c).is_some_and(|tb| tb.order == p.bond(b).order));
            if !bonds_ok {
                continue;
            }
            used[c] = true;
            map[k] = c;
            rec(k + 1, p, t, map, used, best);
            used[c] = false;
        }
        map[k] = usize::MAX;
    }
    rec(0, pattern, target, &mut map, &mut used, &mut best);
    let mut out: Vec<Vec<usize>> = best.into_values().collect();
    out.sort();
    out
}

pub fn mapping_vectors(hits: &[AtomMapping]) -> Vec<Vec<usize>> {
    hits.iter().map(|h| h.target_atoms()).collect()
}
