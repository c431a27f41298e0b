use std::io::Write;

use log::{debug, info};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::{bce_with_logits, net, sigmoid, Model, ModelConfig, Sample};
use crate::error::{Error, Result};
use crate::kv::KvConfig;
use crate::metrics::Confusion;

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub lr: f64,
    pub min_lr: f64,
    /// Cosine schedule period in epochs.
    pub t_max: usize,
    /// L2 penalty added to the gradient before the Adam update.
    pub weight_decay: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    /// Stop after this many epochs without a better checkpoint.
    pub patience: usize,
    /// Probability threshold for the MCC used in checkpoint selection.
    pub threshold: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            lr: 1e-3,
            min_lr: 0.0,
            t_max: 20,
            weight_decay: 1e-5,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            batch_size: 256,
            max_epochs: 600,
            patience: 60,
            threshold: 0.5,
        }
    }
}

impl TrainConfig {
    pub fn to_kv(&self) -> KvConfig {
        let mut c = KvConfig::new();
        c.set("lr", self.lr);
        c.set("min_lr", self.min_lr);
        c.set("t_max", self.t_max);
        c.set("weight_decay", self.weight_decay);
        c.set("beta1", self.beta1);
        c.set("beta2", self.beta2);
        c.set("eps", self.eps);
        c.set("batch_size", self.batch_size);
        c.set("max_epochs", self.max_epochs);
        c.set("patience", self.patience);
        c.set("threshold", self.threshold);
        c
    }

    pub fn from_kv(kv: &KvConfig, base: &TrainConfig) -> Result<Self> {
        let mut c = base.clone();
        kv.read_into("lr", &mut c.lr)?;
        kv.read_into("min_lr", &mut c.min_lr)?;
        kv.read_into("t_max", &mut c.t_max)?;
        kv.read_into("weight_decay", &mut c.weight_decay)?;
        kv.read_into("beta1", &mut c.beta1)?;
        kv.read_into("beta2", &mut c.beta2)?;
        kv.read_into("eps", &mut c.eps)?;
        kv.read_into("batch_size", &mut c.batch_size)?;
        kv.read_into("max_epochs", &mut c.max_epochs)?;
        kv.read_into("patience", &mut c.patience)?;
        kv.read_into("threshold", &mut c.threshold)?;
        if c.batch_size == 0 || c.t_max == 0 {
            return Err(Error::Value("batch_size and t_max must be positive".into()));
        }
        Ok(c)
    }
}

/// Cosine annealing in closed form (periodic past `t_max`).
pub fn cosine_lr(epoch: usize, base: f64, min_lr: f64, t_max: usize) -> f64 {
    let phase = std::f64::consts::PI * epoch as f64 / t_max as f64;
    min_lr + (base - min_lr) * (1.0 + phase.cos()) / 2.0
}

/// Adam with the weight decay folded into the gradient.
#[derive(Debug, Clone)]
pub struct Adam {
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
    beta1: f64,
    beta2: f64,
    eps: f64,
    weight_decay: f64,
}

impl Adam {
    pub fn new(n: usize, tc: &TrainConfig) -> Self {
        Adam {
            m: vec![0.0; n],
            v: vec![0.0; n],
            t: 0,
            beta1: tc.beta1,
            beta2: tc.beta2,
            eps: tc.eps,
            weight_decay: tc.weight_decay,
        }
    }

    pub fn step(&mut self, params: &mut [f64], grad: &[f64], lr: f64) {
        self.t += 1;
        let c1 = 1.0 - self.beta1.powi(self.t);
        let c2 = 1.0 - self.beta2.powi(self.t);
        for i in 0..params.len() {
            let g = grad[i] + self.weight_decay * params[i];
            self.m[i] = self.beta1 * self.m[i] + (1.0 - self.beta1) * g;
            self.v[i] = self.beta2 * self.v[i] + (1.0 - self.beta2) * g * g;
            let mh = self.m[i] / c1;
            let vh = self.v[i] / c2;
            params[i] -= lr * mh / (vh.sqrt() + self.eps);
        }
    }
}

#[derive(Debug, Clone)]
pub struct ValidationSet {
    pub name: String,
    pub samples: Vec<Sample>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpochLog {
    pub epoch: usize,
    pub lr: f64,
    pub train_loss: f64,
    /// One entry per validation set; NaN when the set has no observed label.
    pub val_mcc: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub model: Model,
    pub best_epoch: usize,
    /// Mean validation MCC of the selected checkpoint.
    pub best_score: f64,
    pub val_names: Vec<String>,
    pub log: Vec<EpochLog>,
    pub stopped_early: bool,
}

/// MCC over all observed labels at `threshold` (calls are `p >= threshold`);
/// `None` when nothing is observed.
pub fn evaluate_mcc(model: &Model, samples: &[Sample], threshold: f64) -> Result<Option<f64>> {
    let per: Vec<Confusion> = samples
        .par_iter()
        .map(|s| {
            let probs = model.predict(&s.words)?;
            let mut c = Confusion::default();
            for &(j, y) in &s.labels {
                c.add(probs[j] >= threshold, y);
            }
            Ok(c)
        })
        .collect::<Result<_>>()?;
    let mut total = Confusion::default();
    for c in per {
        total.tp += c.tp;
        total.fp += c.fp;
        total.tn += c.tn;
        total.fn_ += c.fn_;
    }
    Ok((total.total() > 0).then(|| total.mcc()))
}

fn splitmix(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

/// Trains from a fresh model initialized by `config.seed`. The checkpoint
/// with the highest mean validation MCC is returned; with no validation set
/// the training-set MCC is used instead.
pub fn train(config: &ModelConfig, tc: &TrainConfig, train: &[Sample], val: &[ValidationSet]) -> Result<TrainOutcome> {
    let mut model = Model::new(config.clone())?;
    let samples: Vec<&Sample> = train.iter().filter(|s| !s.labels.is_empty()).collect();
    if samples.is_empty() {
        return Err(Error::EmptyDataset);
    }
    for s in &samples {
        model.check_words(&s.words)?;
        if let Some(&(j, _)) = s.labels.iter().find(|&&(j, _)| j >= config.n_fragments) {
            return Err(Error::Index(format!("{}: label column {j}", s.protein_id)));
        }
    }
    let mut adam = Adam::new(model.params.len(), tc);
    let mut order: Vec<usize> = (0..samples.len()).collect();
    let mut shuffle_rng = ChaCha8Rng::seed_from_u64(config.seed);
    shuffle_rng.set_stream(1);
    let train_owned: Vec<Sample>;
    let selection: Vec<(&str, &[Sample])> = if val.is_empty() {
        train_owned = samples.iter().map(|s| (*s).clone()).collect();
        vec![("train", train_owned.as_slice())]
    } else {
        val.iter().map(|v| (v.name.as_str(), v.samples.as_slice())).collect()
    };

    let mut best: Option<(f64, usize, Vec<f64>)> = None;
    let mut log = Vec::new();
    let mut stopped_early = false;
    for epoch in 0..tc.max_epochs {
        let lr = cosine_lr(epoch, tc.lr, tc.min_lr, tc.t_max);
        order.shuffle(&mut shuffle_rng);
        let mut loss_sum = 0.0;
        let mut n_obs = 0usize;
        for chunk in order.chunks(tc.batch_size) {
            let batch_obs: usize = chunk.iter().map(|&i| samples[i].labels.len()).sum();
            let parts: Vec<(f64, Vec<f64>)> = chunk
                .par_iter()
                .map(|&i| {
                    let s = samples[i];
                    let seed = splitmix(config.seed ^ splitmix((epoch as u64) << 32 | i as u64));
                    let mut rng = ChaCha8Rng::seed_from_u64(seed);
                    let (logits, cache) = net::forward(
                        &model.layout,
                        &model.params,
                        s.words.as_slice(),
                        Some((config.dropout, &mut rng)),
                    );
                    let mut dl = vec![0.0; config.n_fragments];
                    let mut loss = 0.0;
                    for &(j, y) in &s.labels {
                        let y = if y { 1.0 } else { 0.0 };
                        loss += bce_with_logits(logits[j], y);
                        dl[j] = (sigmoid(logits[j]) - y) / batch_obs as f64;
                    }
                    let mut g = vec![0.0; model.params.len()];
                    net::backward(&model.layout, &model.params, &cache, &dl, &mut g);
                    (loss, g)
                })
                .collect();
            let mut grad = vec![0.0; model.params.len()];
            for (loss, g) in parts {
                loss_sum += loss;
                grad.iter_mut().zip(&g).for_each(|(a, b)| *a += b);
            }
            n_obs += batch_obs;
            if !loss_sum.is_finite() || grad.iter().any(|v| !v.is_finite()) {
                return Err(Error::Divergence { epoch });
            }
            adam.step(&mut model.params, &grad, lr);
        }
        let train_loss = loss_sum / n_obs as f64;
        let mut val_mcc = Vec::with_capacity(selection.len());
        for (_, set) in &selection {
            val_mcc.push(evaluate_mcc(&model, set, tc.threshold)?.unwrap_or(f64::NAN));
        }
        let scored: Vec<f64> = val_mcc.iter().copied().filter(|v| !v.is_nan()).collect();
        let score = if scored.is_empty() {
            f64::NEG_INFINITY
        } else {
            scored.iter().sum::<f64>() / scored.len() as f64
        };
        debug!("epoch {epoch} lr {lr:.2e} loss {train_loss:.5} mcc {val_mcc:?}");
        log.push(EpochLog {
            epoch,
            lr,
            train_loss,
            val_mcc,
        });
        let improved = best.as_ref().is_none_or(|(b, _, _)| score > *b);
        if improved {
            best = Some((score, epoch, model.params.clone()));
        } else if epoch - best.as_ref().unwrap().1 >= tc.patience {
            info!("early stop at epoch {epoch}");
            stopped_early = true;
            break;
        }
    }
    let (best_score, best_epoch, params) = best.ok_or(Error::EmptyDataset)?;
    model.params = params;
    model.epoch = best_epoch;
    Ok(TrainOutcome {
        model,
        best_epoch,
        best_score,
        val_names: selection.iter().map(|(n, _)| n.to_string()).collect(),
        log,
        stopped_early,
    })
}

/// `epoch, lr, train_loss, val_mcc_<name>...` as TSV.
pub fn write_log_tsv(mut w: impl Write, outcome: &TrainOutcome) -> Result<()> {
    write!(w, "epoch\tlr\ttrain_loss")?;
    for n in &outcome.val_names {
        write!(w, "\tval_mcc_{n}")?;
    }
    writeln!(w)?;
    for e in &outcome.log {
        write!(w, "{}\t{:.6e}\t{:.6}", e.epoch, e.lr, e.train_loss)?;
        for v in &e.val_mcc {
            write!(w, "\t{v:.6}")?;
        }
        writeln!(w)?;
    }
    Ok(())
}
