//! Property suites. Each property draws a seed per case and builds its
//! random input from it, so every case is reproducible from the reported
//! seed.

pub mod attribution;
pub mod chem;
pub mod dataset;
pub mod fragment;
pub mod model;
pub mod rulebase;
pub mod screening;
pub mod structval;
pub mod words;

use proptest::prelude::any;
use proptest::test_runner::{Config, RngAlgorithm, TestCaseError, TestRng, TestRunner};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub const CASES: u32 = 1000;

#[derive(Debug, Clone)]
pub struct PropOutcome {
    pub suite: &'static str,
    pub name: &'static str,
    pub cases: u32,
    pub result: Result<(), String>,
}

impl PropOutcome {
    pub fn passed(&self) -> bool {
        self.result.is_ok()
    }
}

/// Runs `f` on `cases` seeded inputs.
pub fn check(
    suite: &'static str,
    name: &'static str,
    cases: u32,
    f: impl Fn(&mut ChaCha8Rng) -> Result<(), String>,
) -> PropOutcome {
    let config = Config {
        cases,
        failure_persistence: None,
        max_shrink_iters: 32,
        ..Config::default()
    };
    let mut runner = TestRunner::new_with_rng(config, TestRng::deterministic_rng(RngAlgorithm::ChaCha));
    let result = runner
        .run(&any::<u64>(), |seed| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            f(&mut rng).map_err(|e| TestCaseError::fail(format!("seed {seed}: {e}")))
        })
        .map_err(|e| e.to_string());
    PropOutcome {
        suite,
        name,
        cases,
        result,
    }
}

/// A statistical property judged over `cases` draws as a whole.
pub fn check_aggregate(
    suite: &'static str,
    name: &'static str,
    cases: u32,
    seed: u64,
    f: impl FnOnce(&mut ChaCha8Rng, u32) -> Result<(), String>,
) -> PropOutcome {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    PropOutcome {
        suite,
        name,
        cases,
        result: f(&mut rng, cases),
    }
}

pub fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

pub fn all() -> Vec<PropOutcome> {
    let mut out = Vec::new();
    out.extend(chem::suite());
    out.extend(fragment::suite());
    out.extend(words::suite());
    out.extend(dataset::suite());
    out.extend(model::suite());
    out.extend(attribution::suite());
    out.extend(rulebase::suite());
    out.extend(screening::suite());
    out.extend(structval::suite());
    out
}

/// Panics with every failing property listed.
pub fn assert_suite(outcomes: &[PropOutcome]) {
    let failed: Vec<String> = outcomes
        .iter()
        .filter(|o| !o.passed())
        .map(|o| format!("{}::{}: {}", o.suite, o.name, o.result.as_ref().unwrap_err()))
        .collect();
    assert!(
        failed.is_empty(),
        "{} properties failed:\n{}",
        failed.len(),
        failed.join("\n")
    );
}
