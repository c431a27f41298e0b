use std::collections::BTreeSet;

use rand::seq::{IndexedRandom, SliceRandom};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use pwrules::dataset::{
    dedup_all, label_matrix, split, AffinityRecord, AffinityType, DedupPolicy, Interaction, Source, SplitMode,
    SplitSpec,
};
use pwrules::fragment::FragmentLibrary;

use super::{check, ensure, PropOutcome, CASES};

const SUITE: &str = "dataset";

const LIGANDS: &[&str] = &[
    "c1ccccc1CCN1CCOCC1",
    "c1ccncc1C1CCNCC1",
    "C1CCNCC1CCO",
    "c1ccccc1O",
    "Cc1ccsc1",
    "OCC1CCOCC1",
];

fn library() -> FragmentLibrary {
    FragmentLibrary::from_entries(
        &[
            ("frag_1", "c1ccccc1", 3),
            ("frag_2", "C1CCNCC1", 2),
            ("frag_3", "C1COCCN1", 2),
            ("frag_4", "c1ccncc1", 1),
            ("frag_5", "c1ccsc1", 1),
        ],
        6,
    )
    .unwrap()
}

fn records(rng: &mut ChaCha8Rng) -> Vec<AffinityRecord> {
    let types = [
        AffinityType::Kd,
        AffinityType::Ki,
        AffinityType::IC50,
        AffinityType::EC50,
    ];
    let sources = [
        Source::Pdbbind,
        Source::Bindingdb,
        Source::Bindingnet,
        Source::ChemblBinding,
        Source::ChemblFunctional,
    ];
    (0..rng.random_range(1..=40))
        .map(|_| AffinityRecord {
            protein_id: format!("P{}", rng.random_range(0..4)),
            smiles: LIGANDS.choose(rng).unwrap().to_string(),
            affinity_type: *types.choose(rng).unwrap(),
            value_nm: 10f64.powf(rng.random_range(0.0..6.0)),
            source: *sources.choose(rng).unwrap(),
        })
        .collect()
}

fn pairs(rng: &mut ChaCha8Rng) -> Vec<(String, String)> {
    let np = rng.random_range(10..=30);
    let nl = rng.random_range(10..=30);
    let mut set = BTreeSet::new();
    for _ in 0..rng.random_range(20..=200) {
        set.insert((
            format!("P{}", rng.random_range(0..np)),
            format!("L{}", rng.random_range(0..nl)),
        ));
    }
    let mut v: Vec<_> = set.into_iter().collect();
    v.shuffle(rng);
    v
}

pub fn suite() -> Vec<PropOutcome> {
    vec![
        check(SUITE, "dedup ignores record order", CASES, |rng| {
            let r = records(rng);
            let mut shuffled = r.clone();
            shuffled.shuffle(rng);
            for policy in [DedupPolicy::SourceFirst, DedupPolicy::TypeFirst] {
                ensure(dedup_all(&r, policy) == dedup_all(&shuffled, policy), || {
                    format!("{policy:?} differs")
                })?;
            }
            Ok(())
        }),
        check(SUITE, "no positive label without an active ligand", CASES, |rng| {
            let lib = library();
            let interactions: Vec<Interaction> = records(rng)
                .iter()
                .map(|r| Interaction {
                    protein_id: r.protein_id.clone(),
                    smiles: r.smiles.clone(),
                    active: rng.random_bool(0.3),
                })
                .collect();
            let m = label_matrix(&interactions, &lib, 1).map_err(|e| e.to_string())?;
            for (i, p) in m.proteins().iter().enumerate() {
                let has_active = interactions.iter().any(|x| &x.protein_id == p && x.active);
                let has_one = m.row(i).iter().any(|e| e.1);
                ensure(has_active || !has_one, || format!("{p} labelled 1 with no actives"))?;
            }
            Ok(())
        }),
        check(SUITE, "splits are reproducible and partition the pairs", CASES, |rng| {
            let p = pairs(rng);
            let seed = rng.random();
            for mode in SplitMode::ALL {
                let spec = SplitSpec::new(mode, seed);
                let a = split(&p, &spec).map_err(|e| e.to_string())?;
                ensure(a == split(&p, &spec).map_err(|e| e.to_string())?, || {
                    format!("{mode:?} not reproducible")
                })?;
                let mut seen = vec![0usize; p.len()];
                for idx in a.sets.values().flatten() {
                    seen[*idx] += 1;
                }
                let ok = match mode {
                    SplitMode::NovelComplex => seen.iter().all(|&c| c <= 1),
                    _ => seen.iter().all(|&c| c == 1),
                };
                ensure(ok, || format!("{mode:?} coverage {seen:?}"))?;
            }
            Ok(())
        }),
    ]
}
