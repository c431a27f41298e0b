use rand::Rng;
use rand_chacha::ChaCha8Rng;

use pwrules::matrix::Matrix;
use pwrules::model::{masked_bce_grad, masked_bce_loss, Batch, Model, ModelConfig, Sample};

use super::{random_matrix, relative_error};

/// Small random transformer: D ≤ 16, ≤ 3 words, F ≤ 8, no dropout.
pub fn random_toy_model(rng: &mut ChaCha8Rng) -> Model {
    let heads = [1usize, 2, 4][rng.random_range(0..3)];
    let d = heads * rng.random_range(1..=16 / heads).max(1);
    let mut c = ModelConfig::new(d, rng.random_range(1..=8));
    c.n_heads = heads;
    c.n_layers = rng.random_range(1..=2);
    c.ff_dim = rng.random_range(2..=2 * d);
    c.head_hidden = rng.random_range(2..=d.max(2));
    c.max_words = 3;
    c.dropout = 0.0;
    c.seed = rng.random();
    let mut m = Model::new(c).unwrap();
    // move LayerNorm gains and biases off their 1/0 initialization so their
    // gradients are exercised at a generic point
    for v in m.params_mut() {
        *v += rng.random_range(-0.3..0.3);
    }
    m
}

pub fn random_sample(model: &Model, rng: &mut ChaCha8Rng) -> Sample {
    let c = model.config();
    let n = rng.random_range(0..=c.max_words);
    let mut labels = Vec::new();
    for j in 0..c.n_fragments {
        if rng.random_bool(0.7) {
            labels.push((j, rng.random_bool(0.5)));
        }
    }
    Sample {
        protein_id: "toy".into(),
        words: random_matrix(n, c.embed_dim, 1.0, rng),
        labels,
    }
}

pub fn loss_of(model: &Model, batch: &Batch) -> f64 {
    let logits = model.forward(batch).unwrap();
    masked_bce_loss(&logits, &batch.labels, &batch.observed)
}

/// Largest relative error between analytic and central-difference
/// gradients over all parameters and all real input entries.
pub fn gradient_check(model: &mut Model, batch: &mut Batch, step: f64, floor: f64) -> (f64, String) {
    let logits = model.forward(batch).unwrap();
    let grads = model
        .backward(batch, &masked_bce_grad(&logits, &batch.labels, &batch.observed))
        .unwrap();
    let mut worst = (0.0, String::new());
    let names: Vec<(String, usize, usize)> = model
        .param_specs()
        .iter()
        .map(|s| (s.name.clone(), s.offset, s.len()))
        .collect();
    for (name, off, len) in names {
        for k in off..off + len {
            let orig = model.params()[k];
            model.params_mut()[k] = orig + step;
            let up = loss_of(model, batch);
            model.params_mut()[k] = orig - step;
            let down = loss_of(model, batch);
            model.params_mut()[k] = orig;
            let fd = (up - down) / (2.0 * step);
            let e = relative_error(grads.params[k], fd, floor);
            if e > worst.0 {
                worst = (
                    e,
                    format!("{name}[{}]: analytic {} vs fd {fd}", k - off, grads.params[k]),
                );
            }
        }
    }
    for b in 0..batch.len() {
        for r in 0..batch.words[b].rows() {
            if !batch.mask[b][r] {
                continue;
            }
            for c in 0..batch.words[b].cols() {
                let orig = batch.words[b][(r, c)];
                batch.words[b][(r, c)] = orig + step;
                let up = loss_of(model, batch);
                batch.words[b][(r, c)] = orig - step;
                let down = loss_of(model, batch);
                batch.words[b][(r, c)] = orig;
                let fd = (up - down) / (2.0 * step);
                let e = relative_error(grads.inputs[b][(r, c)], fd, floor);
                if e > worst.0 {
                    worst = (
                        e,
                        format!("input[{b}][{r},{c}]: analytic {} vs fd {fd}", grads.inputs[b][(r, c)]),
                    );
                }
            }
        }
    }
    worst
}

pub fn words_of(rows: usize, d: usize, rng: &mut ChaCha8Rng) -> Matrix {
    random_matrix(rows, d, 1.0, rng)
}
