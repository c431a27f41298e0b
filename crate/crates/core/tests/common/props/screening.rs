use std::collections::{BTreeMap, HashSet};

use rand::seq::{IndexedRandom, SliceRandom};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use pwrules::chem::{canonical_key, parse_smiles, Molecule};
use pwrules::fragment::FragmentLibrary;
use pwrules::metrics::{auc, auc_pairwise, enrichment_factor, top_count};
use pwrules::screening::{pwscore, zscore_fuse, Orientation, ScoredFragment, Specificity, DEFAULT_CAP};

use super::{check, check_aggregate, ensure, PropOutcome, CASES};
use crate::common::chem::{random_molecule, random_subgraph};

const SUITE: &str = "screening";

/// A molecule and up to `max` distinct fragments cut from it, all scored.
fn fixture(rng: &mut ChaCha8Rng, max: usize) -> (Molecule, FragmentLibrary, Vec<ScoredFragment>) {
    loop {
        let m = random_molecule(rng, 14);
        let mut keys = BTreeMap::new();
        for _ in 0..3 * max {
            let sub = random_subgraph(&m, 6, rng);
            let key = canonical_key(&sub);
            if parse_smiles(&key).is_ok() {
                keys.entry(key).or_insert(());
            }
            if keys.len() == max {
                break;
            }
        }
        let entries: Vec<(String, String, usize)> = keys
            .into_keys()
            .enumerate()
            .map(|(i, k)| (format!("frag_{}", i + 1), k, rng.random_range(1..=50)))
            .collect();
        let refs: Vec<(&str, &str, usize)> = entries.iter().map(|(i, s, c)| (i.as_str(), s.as_str(), *c)).collect();
        let Ok(lib) = FragmentLibrary::from_entries(&refs, 100) else {
            continue;
        };
        if lib.is_empty() {
            continue;
        }
        let scored = entries
            .iter()
            .map(|(id, _, _)| ScoredFragment::new(id, rng.random_range(0.0..=1.0), rng.random_range(0.0..=1.0)))
            .collect();
        return (m, lib, scored);
    }
}

fn score_list(rng: &mut ChaCha8Rng, n: usize) -> Vec<(String, f64)> {
    (0..n)
        .map(|i| (format!("M{i:04}"), rng.random_range(-10.0..10.0)))
        .collect()
}

pub fn suite() -> Vec<PropOutcome> {
    vec![
        check(
            SUITE,
            "adding a matched fragment never lowers PWScore below the cap",
            CASES,
            |rng| {
                let (m, lib, scored) = fixture(rng, DEFAULT_CAP);
                let k = rng.random_range(0..scored.len());
                let fewer: Vec<ScoredFragment> = scored
                    .iter()
                    .enumerate()
                    .filter(|&(i, _)| i != k)
                    .map(|(_, s)| s.clone())
                    .collect();
                let a = pwscore("m", &m, &fewer, &lib, DEFAULT_CAP).map_err(|e| e.to_string())?;
                let b = pwscore("m", &m, &scored, &lib, DEFAULT_CAP).map_err(|e| e.to_string())?;
                ensure(b.pwscore >= a.pwscore, || format!("{} -> {}", a.pwscore, b.pwscore))
            },
        ),
        check(SUITE, "PWScore ignores fragment list order", CASES, |rng| {
            let (m, lib, mut scored) = fixture(rng, 8);
            let cap = rng.random_range(1..=DEFAULT_CAP);
            let a = pwscore("m", &m, &scored, &lib, cap).map_err(|e| e.to_string())?;
            scored.shuffle(rng);
            let b = pwscore("m", &m, &scored, &lib, cap).map_err(|e| e.to_string())?;
            ensure(a == b, || format!("{} vs {}", a.pwscore, b.pwscore))
        }),
        check(SUITE, "coverage never exceeds the cap", CASES, |rng| {
            let (m, lib, scored) = fixture(rng, 8);
            let cap = rng.random_range(1..=3);
            let r = pwscore("m", &m, &scored, &lib, cap).map_err(|e| e.to_string())?;
            let mut counts = vec![0usize; m.atom_count()];
            for c in &r.covered {
                for &a in &c.atoms {
                    counts[a] += 1;
                }
            }
            let sum: f64 = r.covered.iter().map(|c| c.s_comp).sum();
            ensure(counts.iter().all(|&c| c <= cap), || {
                format!("counts {counts:?} over cap {cap}")
            })?;
            ensure((sum - r.pwscore).abs() <= 1e-12, || format!("{sum} vs {}", r.pwscore))
        }),
        check(SUITE, "specificity does not depend on the log base", CASES, |rng| {
            let n = rng.random_range(2..=10);
            let chains: Vec<String> = (1..=n).map(|k| "C".repeat(k)).collect();
            let counts: Vec<usize> = (0..n).map(|_| rng.random_range(1..=1000)).collect();
            let ids: Vec<String> = (1..=n).map(|i| format!("frag_{i}")).collect();
            let entries: Vec<(&str, &str, usize)> = (0..n)
                .map(|i| (ids[i].as_str(), chains[i].as_str(), counts[i]))
                .collect();
            let lib = FragmentLibrary::from_entries(&entries, 1000).map_err(|e| e.to_string())?;
            let spec = Specificity::new(&lib);
            let l: Vec<f64> = counts.iter().map(|&c| (c as f64).log10()).collect();
            let (lo, hi) = (
                l.iter().copied().fold(f64::INFINITY, f64::min),
                l.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            );
            for i in 0..n {
                let want = if hi == lo { 1.0 } else { 1.0 - (l[i] - lo) / (hi - lo) };
                let got = spec.get(&ids[i]).map_err(|e| e.to_string())?;
                ensure((got - want).abs() <= 1e-12, || format!("{}: {got} vs {want}", ids[i]))?;
            }
            Ok(())
        }),
        check(SUITE, "z-score fusion is invariant to affine rescaling", CASES, |rng| {
            let n = rng.random_range(2..=50);
            let a = score_list(rng, n);
            let b = score_list(rng, n);
            let (alpha, beta) = (rng.random_range(0.1..10.0), rng.random_range(-100.0..100.0));
            let scaled: Vec<(String, f64)> = a.iter().map(|(id, v)| (id.clone(), alpha * v + beta)).collect();
            let f1 = zscore_fuse(&a, &b, Orientation::Higher, Orientation::Lower).map_err(|e| e.to_string())?;
            let f2 = zscore_fuse(&scaled, &b, Orientation::Higher, Orientation::Lower).map_err(|e| e.to_string())?;
            for ((i1, x), (i2, y)) in f1.iter().zip(&f2) {
                ensure(i1 == i2 && (x - y).abs() <= 1e-9, || format!("{i1}: {x} vs {y}"))?;
            }
            Ok(())
        }),
        check(SUITE, "EF bounds and unit enrichment", CASES, |rng| {
            let n = rng.random_range(1..=400);
            let mut ids: Vec<String> = (0..n).map(|i| format!("M{i:04}")).collect();
            ids.shuffle(rng);
            let n_act = rng.random_range(1..=n);
            let actives: HashSet<String> = ids.choose_multiple(rng, n_act).cloned().collect();
            let x = [0.5, 1.0, 5.0, 10.0, 50.0][rng.random_range(0..5)];
            let ef = enrichment_factor(&ids, &actives, x).map_err(|e| e.to_string())?;
            let bound = n as f64 / n_act as f64;
            ensure((0.0..=bound + 1e-12).contains(&ef), || {
                format!("EF {ef} outside [0, {bound}]")
            })?;
            let k = top_count(n, x).min(n);
            let hits = ids[..k].iter().filter(|i| actives.contains(*i)).count();
            let same_density = hits * n == n_act * k;
            ensure(same_density == ((ef - 1.0).abs() <= 1e-12), || {
                format!("EF {ef} with {hits}/{k} top vs {n_act}/{n} overall")
            })
        }),
        check(
            SUITE,
            "AUC: pairwise and average-rank definitions agree",
            CASES,
            |rng| {
                let n = rng.random_range(2..=200);
                let scores: Vec<f64> = (0..n).map(|_| f64::from(rng.random_range(0..20))).collect();
                let mut truth: Vec<bool> = (0..n).map(|_| rng.random_bool(0.3)).collect();
                truth[0] = true;
                truth[1] = false;
                let a = auc(&scores, &truth).map_err(|e| e.to_string())?;
                let b = auc_pairwise(&scores, &truth).map_err(|e| e.to_string())?;
                ensure((a - b).abs() <= 1e-12, || format!("{a} vs {b}"))
            },
        ),
        check_aggregate(SUITE, "random rankings give EF near 1", CASES, 5, |rng, cases| {
            let n = 1000;
            let mut ids: Vec<String> = (0..n).map(|i| format!("M{i:04}")).collect();
            let actives: HashSet<String> = ids.choose_multiple(rng, 50).cloned().collect();
            let mut efs = Vec::with_capacity(cases as usize);
            for _ in 0..cases {
                ids.shuffle(rng);
                efs.push(enrichment_factor(&ids, &actives, 5.0).map_err(|e| e.to_string())?);
            }
            let mean = efs.iter().sum::<f64>() / efs.len() as f64;
            let sd = (efs.iter().map(|e| (e - mean).powi(2)).sum::<f64>() / (efs.len() - 1) as f64).sqrt();
            let se = sd / (efs.len() as f64).sqrt();
            ensure((mean - 1.0).abs() <= 3.0 * se, || {
                format!("mean EF {mean}, standard error {se}")
            })
        }),
    ]
}
