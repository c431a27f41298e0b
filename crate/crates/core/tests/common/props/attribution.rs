use rand::seq::SliceRandom;
use rand::Rng;

use pwrules::attribution::{condense, integrated_gradients, select_words, LogitModel, RuleRecord};
use pwrules::error::Result as PwResult;
use pwrules::matrix::Matrix;
use pwrules::model::Model;

use super::{check, check_aggregate, ensure, PropOutcome, CASES};
use crate::common::nn::{random_toy_model, words_of};
use crate::common::random_matrix;

const SUITE: &str = "attribution";

/// Logit `a` plus logit `b` of an inner model, exposed as output 0.
struct SumOfTwo<'a> {
    model: &'a Model,
    a: usize,
    b: usize,
}

impl LogitModel for SumOfTwo<'_> {
    fn n_outputs(&self) -> usize {
        1
    }

    fn logit_and_gradient(&self, x: &Matrix, _target: usize) -> PwResult<(f64, Matrix)> {
        let (la, ga) = self.model.logit_gradient(x, self.a)?;
        let (lb, gb) = self.model.logit_gradient(x, self.b)?;
        let g: Vec<f64> = ga.as_slice().iter().zip(gb.as_slice()).map(|(p, q)| p + q).collect();
        Ok((la + lb, Matrix::from_vec(x.rows(), x.cols(), g)?))
    }
}

fn toy_input(model: &Model, rng: &mut rand_chacha::ChaCha8Rng) -> Matrix {
    let c = model.config();
    words_of(rng.random_range(1..=c.max_words), c.embed_dim, rng)
}

pub fn suite() -> Vec<PropOutcome> {
    vec![
        check(SUITE, "attributions are linear in the target", CASES, |rng| {
            let model = random_toy_model(rng);
            let x = toy_input(&model, rng);
            let base = Matrix::zeros(x.rows(), x.cols());
            let f = model.config().n_fragments;
            let (a, b) = (rng.random_range(0..f), rng.random_range(0..f));
            let m = rng.random_range(2..=16);
            let ia = integrated_gradients(&model, &x, &base, a, m).map_err(|e| e.to_string())?;
            let ib = integrated_gradients(&model, &x, &base, b, m).map_err(|e| e.to_string())?;
            let sum =
                integrated_gradients(&SumOfTwo { model: &model, a, b }, &x, &base, 0, m).map_err(|e| e.to_string())?;
            for ((s, p), q) in sum
                .values
                .as_slice()
                .iter()
                .zip(ia.values.as_slice())
                .zip(ib.values.as_slice())
            {
                ensure((s - (p + q)).abs() <= 1e-10 * (1.0 + s.abs()), || {
                    format!("{s} vs {p} + {q}")
                })?;
            }
            Ok(())
        }),
        check_aggregate(
            SUITE,
            "doubling m does not grow the completeness gap",
            CASES,
            11,
            |rng, cases| {
                // Judged over the whole population: per-toy growth beyond 10% must
                // be rare, and the mean gap must shrink.
                let (mut violations, mut sum_m, mut sum_2m) = (0u32, 0.0, 0.0);
                for _ in 0..cases {
                    let model = random_toy_model(rng);
                    let x = toy_input(&model, rng);
                    let base = Matrix::zeros(x.rows(), x.cols());
                    let t = rng.random_range(0..model.config().n_fragments);
                    let m = rng.random_range(4..=32);
                    let g1 = integrated_gradients(&model, &x, &base, t, m)
                        .map_err(|e| e.to_string())?
                        .completeness_gap;
                    let g2 = integrated_gradients(&model, &x, &base, t, 2 * m)
                        .map_err(|e| e.to_string())?
                        .completeness_gap;
                    if g2 > 1.1 * g1 + 1e-12 {
                        violations += 1;
                    }
                    sum_m += g1;
                    sum_2m += g2;
                }
                ensure(violations * 100 <= cases && sum_2m <= 1.1 * sum_m, || {
                    format!(
                        "{violations}/{cases} toys grew; mean gap {} -> {}",
                        sum_m / cases as f64,
                        sum_2m / cases as f64
                    )
                })
            },
        ),
        check(SUITE, "select_words does not depend on word order", CASES, |rng| {
            let n = rng.random_range(1..=12);
            // coarse values so ties are frequent
            let scores: Vec<f64> = (0..n).map(|_| f64::from(rng.random_range(-3i32..=6)) / 4.0).collect();
            let mut order: Vec<usize> = (0..n).collect();
            order.shuffle(rng);
            let permuted: Vec<f64> = order.iter().map(|&i| scores[i]).collect();
            match (select_words(&scores), select_words(&permuted)) {
                (Ok(a), Ok(b)) => {
                    let mut va: Vec<f64> = a.iter().map(|&i| scores[i]).collect();
                    let mut vb: Vec<f64> = b.iter().map(|&i| permuted[i]).collect();
                    va.sort_by(f64::total_cmp);
                    vb.sort_by(f64::total_cmp);
                    ensure(va == vb, || format!("{va:?} vs {vb:?}"))
                }
                (Err(_), Err(_)) => Ok(()),
                _ => Err("one ordering selects nothing".into()),
            }
        }),
        check(SUITE, "rule scores lie in [0, 1]", CASES, |rng| {
            let raw = random_matrix(rng.random_range(1..=10), rng.random_range(1..=8), 3.0, rng);
            let scores = condense(&raw);
            let Ok(chosen) = select_words(&scores) else {
                return Ok(());
            };
            let pred = rng.random_range(0.0..=1.0);
            for i in chosen {
                ensure(scores[i] <= 1.0 + 1e-15, || format!("attr {} > 1", scores[i]))?;
                let r = RuleRecord::new("W", "frag_1", pred, scores[i]);
                ensure((0.0..=1.0).contains(&r.rule_score), || {
                    format!("rule score {}", r.rule_score)
                })?;
            }
            Ok(())
        }),
    ]
}
