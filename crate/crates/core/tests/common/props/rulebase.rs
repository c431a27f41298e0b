use rand::seq::{IndexedRandom, SliceRandom};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use pwrules::attribution::RuleRecord;
use pwrules::rulebase::{aggregate, filter_rules, match_rules, Aggregation, RuleDb};

use super::{check, ensure, PropOutcome, CASES};

const SUITE: &str = "rulebase";
const WORDS: &[&str] = &["AAAAA", "CDEFG", "DTGAD", "KLMNP", "QRSTV", "WYWYW"];

fn scores(rng: &mut ChaCha8Rng, max: usize) -> Vec<f64> {
    (0..rng.random_range(1..=max))
        .map(|_| rng.random_range(0.0..=1.0))
        .collect()
}

fn rules(rng: &mut ChaCha8Rng) -> Vec<RuleRecord> {
    (0..rng.random_range(0..=30))
        .map(|_| {
            let mut r = RuleRecord::new(
                WORDS.choose(rng).unwrap(),
                &format!("frag_{}", rng.random_range(1..=5)),
                rng.random_range(0.5..=1.0),
                rng.random_range(0.0..=1.0),
            );
            r.accuracy = rng.random_bool(0.9).then(|| f64::from(rng.random_range(0..=8)) / 8.0);
            r
        })
        .collect()
}

pub fn suite() -> Vec<PropOutcome> {
    vec![
        check(SUITE, "joint aggregation is permutation-invariant", CASES, |rng| {
            let s = scores(rng, 12);
            let mut p = s.clone();
            p.shuffle(rng);
            let (a, b) = (aggregate(&s, Aggregation::Joint), aggregate(&p, Aggregation::Joint));
            ensure((a - b).abs() <= 1e-12, || format!("{a} vs {b}"))
        }),
        check(SUITE, "appending a score raises the joint score", CASES, |rng| {
            let s = scores(rng, 8);
            let before = aggregate(&s, Aggregation::Joint);
            let r = rng.random_range(1e-3..=1.0);
            let mut more = s.clone();
            more.push(r);
            let after = aggregate(&more, Aggregation::Joint);
            ensure(after >= before, || format!("{before} -> {after} after {r}"))?;
            ensure(before == 1.0 || after > before, || {
                format!("{before} not raised by {r}")
            })
        }),
        check(SUITE, "joint is at least max and at least avg", CASES, |rng| {
            let s = scores(rng, 12);
            let j = aggregate(&s, Aggregation::Joint);
            let (m, a) = (aggregate(&s, Aggregation::Max), aggregate(&s, Aggregation::Avg));
            ensure(j >= m - 1e-15 && j >= a - 1e-15, || {
                format!("joint {j}, max {m}, avg {a}")
            })
        }),
        check(SUITE, "filter_rules is idempotent", CASES, |rng| {
            let once = filter_rules(rules(rng));
            let twice = filter_rules(once.clone());
            ensure(once == twice, || "second filter changed the rules".into())
        }),
        check(SUITE, "rule matching ignores query word order", CASES, |rng| {
            let db = RuleDb::new(rules(rng));
            let mut q: Vec<String> = (0..rng.random_range(0..=8))
                .map(|_| WORDS.choose(rng).unwrap().to_string())
                .collect();
            let a = match_rules(&q, &db);
            q.shuffle(rng);
            ensure(a == match_rules(&q, &db), || "match depends on order".into())
        }),
    ]
}
