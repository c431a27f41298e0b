use rand::seq::SliceRandom;
use rand::Rng;

use pwrules::chem::{
    canonical_key, canonical_smiles, descriptors, find_substructure, parse_smiles, Element, DEFAULT_MAX_HITS,
};

use super::{check, ensure, PropOutcome, CASES};
use crate::common::chem::{brute_force_embeddings, mapping_vectors, random_molecule, random_subgraph};

const SUITE: &str = "chem";

/// IUPAC standard atomic weights, rounded to 3 decimals.
fn standard_mass(e: Element) -> f64 {
    match e.symbol() {
        "H" => 1.008,
        "C" => 12.011,
        "N" => 14.007,
        "O" => 15.999,
        "S" => 32.06,
        "Cl" => 35.45,
        s => panic!("no reference mass for {s}"),
    }
}

/// Pattern/target pair with at most `max_heavy` atoms each; half the
/// patterns are cut from the target so that hits are common.
pub fn pattern_pair(
    rng: &mut rand_chacha::ChaCha8Rng,
    max_heavy: usize,
) -> (pwrules::chem::Molecule, pwrules::chem::Molecule) {
    let target = random_molecule(rng, max_heavy);
    let pattern = if rng.random_bool(0.5) {
        random_subgraph(&target, max_heavy, rng)
    } else {
        random_molecule(rng, max_heavy.min(6))
    };
    (pattern, target)
}

pub fn substructure_oracle(cases: u32) -> PropOutcome {
    check(
        SUITE,
        "find_substructure equals brute-force enumeration",
        cases,
        |rng| {
            let (p, t) = pattern_pair(rng, 12);
            let got = mapping_vectors(&find_substructure(&p, &t, DEFAULT_MAX_HITS).map_err(|e| e.to_string())?);
            let want = brute_force_embeddings(&p, &t);
            ensure(got == want, || {
                format!(
                    "{} in {}: got {got:?}, want {want:?}",
                    canonical_smiles(&p),
                    canonical_smiles(&t)
                )
            })
        },
    )
}

pub fn suite() -> Vec<PropOutcome> {
    vec![
        substructure_oracle(CASES),
        check(SUITE, "mappings preserve every pattern bond", CASES, |rng| {
            let (p, t) = pattern_pair(rng, 12);
            for hit in find_substructure(&p, &t, DEFAULT_MAX_HITS).map_err(|e| e.to_string())? {
                let map = hit.target_atoms();
                for b in p.bonds() {
                    let tb = t.bond_between(map[b.a], map[b.b]);
                    ensure(tb.is_some_and(|tb| tb.order == b.order), || {
                        format!("bond {}-{} not preserved by {map:?}", b.a, b.b)
                    })?;
                }
            }
            Ok(())
        }),
        check(SUITE, "canonical round trip is a fixpoint", CASES, |rng| {
            let m = random_molecule(rng, 16);
            let first = canonical_smiles(&m);
            let again = canonical_smiles(&parse_smiles(&first).map_err(|e| format!("{first}: {e}"))?);
            ensure(first == again, || format!("{first} -> {again}"))?;
            let key = canonical_key(&m);
            let key2 = canonical_key(&parse_smiles(&key).map_err(|e| format!("{key}: {e}"))?);
            ensure(key == key2, || format!("{key} -> {key2}"))
        }),
        check(SUITE, "canonical key ignores atom order", CASES, |rng| {
            let m = random_molecule(rng, 16);
            let mut order: Vec<usize> = (0..m.atom_count()).collect();
            order.shuffle(rng);
            let (a, b) = (canonical_key(&m), canonical_key(&m.permuted(&order)));
            ensure(a == b, || format!("{a} vs {b} under {order:?}"))
        }),
        check(SUITE, "molecular weight is the sum of atomic masses", CASES, |rng| {
            let m = random_molecule(rng, 16);
            let want: f64 = m
                .atoms()
                .iter()
                .map(|a| standard_mass(a.element) + f64::from(a.hydrogens) * standard_mass(Element::H))
                .sum();
            let got = descriptors(&m, None).mw;
            ensure((got - want).abs() <= 0.01, || {
                format!("{} mw {got} vs {want}", canonical_smiles(&m))
            })
        }),
    ]
}
