use rand::Rng;

use pwrules::matrix::Matrix;
use pwrules::model::{cosine_lr, masked_bce_grad, masked_bce_loss, Batch, Sample};

use super::{check, ensure, PropOutcome, CASES};
use crate::common::nn::{gradient_check, loss_of, random_sample, random_toy_model};
use crate::common::random_matrix;

const SUITE: &str = "model";

pub fn suite() -> Vec<PropOutcome> {
    vec![
        check(SUITE, "backward matches central differences", CASES, |rng| {
            let mut model = random_toy_model(rng);
            let s = random_sample(&model, rng);
            let mut batch = Batch::from_samples(&[&s], model.config()).map_err(|e| e.to_string())?;
            let (err, at) = gradient_check(&mut model, &mut batch, 1e-5, 1e-5);
            ensure(err <= 1e-4, || format!("relative error {err:.3e} at {at}"))
        }),
        check(SUITE, "NA entries do not change the loss", CASES, |rng| {
            let model = random_toy_model(rng);
            let s = random_sample(&model, rng);
            let na = Sample {
                labels: Vec::new(),
                ..random_sample(&model, rng)
            };
            let one = Batch::from_samples(&[&s], model.config()).map_err(|e| e.to_string())?;
            let mut two = Batch::from_samples(&[&s, &na], model.config()).map_err(|e| e.to_string())?;
            // unobserved label values are arbitrary
            for j in 0..two.labels.cols() {
                for b in 0..2 {
                    if two.observed[(b, j)] == 0.0 {
                        two.labels[(b, j)] = f64::from(u8::from(rng.random_bool(0.5)));
                    }
                }
            }
            let (l1, l2) = (loss_of(&model, &one), loss_of(&model, &two));
            ensure((l1 - l2).abs() <= 1e-12, || format!("{l1} vs {l2}"))
        }),
        check(SUITE, "padded positions do not change logits", CASES, |rng| {
            let model = random_toy_model(rng);
            let s = random_sample(&model, rng);
            let clean = Batch::from_samples(&[&s], model.config()).map_err(|e| e.to_string())?;
            let mut noisy = clean.clone();
            for r in s.words.rows()..noisy.words[0].rows() {
                for c in 0..noisy.words[0].cols() {
                    noisy.words[0][(r, c)] = rng.random_range(-5.0..5.0);
                }
            }
            let a = model.forward(&clean).map_err(|e| e.to_string())?;
            let b = model.forward(&noisy).map_err(|e| e.to_string())?;
            let single = model.logits(&s.words).map_err(|e| e.to_string())?;
            for j in 0..a.cols() {
                ensure((a[(0, j)] - b[(0, j)]).abs() <= 1e-9, || {
                    format!("logit {j}: {} vs {}", a[(0, j)], b[(0, j)])
                })?;
                ensure((a[(0, j)] - single[j]).abs() <= 1e-9, || {
                    format!("batch vs single logit {j}")
                })?;
            }
            Ok(())
        }),
        check(
            SUITE,
            "masked columns and padded words get zero gradient",
            CASES,
            |rng| {
                let model = random_toy_model(rng);
                let s = random_sample(&model, rng);
                let batch = Batch::from_samples(&[&s], model.config()).map_err(|e| e.to_string())?;
                let logits = model.forward(&batch).map_err(|e| e.to_string())?;
                let dl = masked_bce_grad(&logits, &batch.labels, &batch.observed);
                for j in 0..dl.cols() {
                    if batch.observed[(0, j)] == 0.0 {
                        ensure(dl[(0, j)] == 0.0, || {
                            format!("masked column {j} has gradient {}", dl[(0, j)])
                        })?;
                    }
                }
                let g = model.backward(&batch, &dl).map_err(|e| e.to_string())?;
                for r in s.words.rows()..g.inputs[0].rows() {
                    ensure(g.inputs[0].row(r).iter().all(|&v| v == 0.0), || {
                        format!("padded row {r} has gradient")
                    })?;
                }
                Ok(())
            },
        ),
        check(SUITE, "masked loss ignores unobserved logits", CASES, |rng| {
            let (b, f) = (rng.random_range(1..=4), rng.random_range(1..=8));
            let logits = random_matrix(b, f, 5.0, rng);
            let mut labels = Matrix::zeros(b, f);
            let mut observed = Matrix::zeros(b, f);
            for i in 0..b {
                for j in 0..f {
                    labels[(i, j)] = f64::from(u8::from(rng.random_bool(0.5)));
                    observed[(i, j)] = f64::from(u8::from(rng.random_bool(0.6)));
                }
            }
            let mut moved = logits.clone();
            for i in 0..b {
                for j in 0..f {
                    if observed[(i, j)] == 0.0 {
                        moved[(i, j)] = rng.random_range(-50.0..50.0);
                    }
                }
            }
            let (l1, l2) = (
                masked_bce_loss(&logits, &labels, &observed),
                masked_bce_loss(&moved, &labels, &observed),
            );
            ensure(l1 == l2, || format!("{l1} vs {l2}"))
        }),
        check(SUITE, "cosine schedule endpoints", CASES, |rng| {
            let t = rng.random_range(1..=1000);
            let base = rng.random_range(1e-6..1e-1);
            let min = rng.random_range(0.0..base);
            ensure(cosine_lr(0, 1e-3, 0.0, 20) == 1e-3, || "lr(0) != 1e-3".into())?;
            ensure(cosine_lr(20, 1e-3, 0.0, 20).abs() <= 1e-18, || "lr(T_max) != 0".into())?;
            ensure((cosine_lr(0, base, min, t) - base).abs() <= 1e-15 * base, || {
                format!("lr(0) = {}", cosine_lr(0, base, min, t))
            })?;
            let end = cosine_lr(t, base, min, t);
            ensure((end - min).abs() <= 1e-15, || format!("lr({t}) = {end}, want {min}"))
        }),
    ]
}
