use std::collections::BTreeSet;

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use pwrules::chem::{canonical_smiles, contains_substructure, parse_smiles, Molecule};
use pwrules::fragment::{build_library, enumerate_fragments, identify_cut_bonds, DefaultCutRules, LibraryConfig};

use super::{check, ensure, PropOutcome, CASES};
use crate::common::chem::random_molecule;

const SUITE: &str = "fragment";

fn corpus(rng: &mut ChaCha8Rng) -> Vec<Molecule> {
    (0..rng.random_range(2..=8)).map(|_| random_molecule(rng, 14)).collect()
}

fn fragment_keys(corpus: &[Molecule], min_freq: f64) -> BTreeSet<String> {
    let config = LibraryConfig {
        min_freq,
        ..LibraryConfig::default()
    };
    match build_library(corpus, &config, &DefaultCutRules::default()) {
        Ok(lib) => lib.fragments().iter().map(|f| f.smiles.clone()).collect(),
        Err(_) => BTreeSet::new(),
    }
}

pub fn suite() -> Vec<PropOutcome> {
    vec![
        check(SUITE, "library build is byte-identical on rebuild", CASES, |rng| {
            let c = corpus(rng);
            let bytes = |c: &[Molecule]| -> Option<Vec<u8>> {
                let lib = build_library(c, &LibraryConfig::default(), &DefaultCutRules::default()).ok()?;
                let mut out = Vec::new();
                lib.write_jsonl(&mut out).unwrap();
                Some(out)
            };
            ensure(bytes(&c) == bytes(&c), || "rebuild differs".into())
        }),
        check(SUITE, "every fragment key re-parses", CASES, |rng| {
            let c = corpus(rng);
            let Ok(lib) = build_library(&c, &LibraryConfig::default(), &DefaultCutRules::default()) else {
                return Ok(());
            };
            for f in lib.fragments() {
                parse_smiles(&f.smiles).map_err(|e| format!("{}: {e}", f.smiles))?;
            }
            Ok(())
        }),
        check(SUITE, "raising min_freq never adds fragments", CASES, |rng| {
            let c = corpus(rng);
            let lo = rng.random_range(0.0..0.6);
            let hi = lo + rng.random_range(0.0..0.5);
            let (a, b) = (fragment_keys(&c, lo), fragment_keys(&c, hi));
            ensure(b.is_subset(&a), || {
                format!("min_freq {hi} adds {:?}", b.difference(&a).collect::<Vec<_>>())
            })
        }),
        check(SUITE, "enumerated fragments are substructures", CASES, |rng| {
            let m = random_molecule(rng, 16);
            let cuts = identify_cut_bonds(&m, &DefaultCutRules::default());
            let keys = enumerate_fragments(&m, &cuts, 3, 25).map_err(|e| e.to_string())?;
            ensure(!keys.is_empty(), || "no fragments".into())?;
            for k in keys {
                let f = parse_smiles(&k).map_err(|e| format!("{k}: {e}"))?;
                ensure(contains_substructure(&f, &m), || {
                    format!("{k} not in {}", canonical_smiles(&m))
                })?;
            }
            Ok(())
        }),
    ]
}
