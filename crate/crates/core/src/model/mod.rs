//! Multi-label transformer classifier: word embeddings of one protein in,
//! one logit per library fragment out.

mod net;
mod train;

use std::collections::HashMap;
use std::io::{Read, Write};

use log::warn;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::dataset::LabelMatrix;
use crate::error::{Error, Result};
use crate::io::{expect_magic, read_f32, read_string, read_u32, write_string};
use crate::kv::KvConfig;
use crate::matrix::Matrix;

pub use net::TensorSpec;
pub use train::{
    cosine_lr, evaluate_mcc, train, write_log_tsv, Adam, EpochLog, TrainConfig, TrainOutcome, ValidationSet,
};

#[derive(Debug, Clone, PartialEq)]
pub struct ModelConfig {
    pub embed_dim: usize,
    pub n_layers: usize,
    pub n_heads: usize,
    pub ff_dim: usize,
    /// Width of the hidden layer in the classification head.
    pub head_hidden: usize,
    pub n_fragments: usize,
    pub max_words: usize,
    pub dropout: f64,
    pub seed: u64,
}

impl ModelConfig {
    /// Defaults: 2 layers, 4 heads, feed-forward width 4D, dropout 0.1.
    pub fn new(embed_dim: usize, n_fragments: usize) -> Self {
        ModelConfig {
            embed_dim,
            n_layers: 2,
            n_heads: 4,
            ff_dim: 4 * embed_dim,
            head_hidden: embed_dim,
            n_fragments,
            max_words: 64,
            dropout: 0.1,
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Value(m));
        if self.embed_dim == 0 || self.n_heads == 0 || !self.embed_dim.is_multiple_of(self.n_heads) {
            return bad(format!(
                "embed_dim {} must be a positive multiple of n_heads {}",
                self.embed_dim, self.n_heads
            ));
        }
        if self.n_fragments == 0 {
            return bad("n_fragments must be at least 1".into());
        }
        if self.ff_dim == 0 || self.head_hidden == 0 || self.max_words == 0 {
            return bad("ff_dim, head_hidden and max_words must be positive".into());
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return bad(format!("dropout {} outside [0, 1)", self.dropout));
        }
        Ok(())
    }

    pub fn to_kv(&self) -> KvConfig {
        let mut c = KvConfig::new();
        c.set("embed_dim", self.embed_dim);
        c.set("n_layers", self.n_layers);
        c.set("n_heads", self.n_heads);
        c.set("ff_dim", self.ff_dim);
        c.set("head_hidden", self.head_hidden);
        c.set("n_fragments", self.n_fragments);
        c.set("max_words", self.max_words);
        c.set("dropout", self.dropout);
        c.set("seed", self.seed);
        c
    }

    /// Missing keys keep the values of `base`.
    pub fn from_kv(kv: &KvConfig, base: &ModelConfig) -> Result<Self> {
        let mut c = base.clone();
        kv.read_into("embed_dim", &mut c.embed_dim)?;
        kv.read_into("n_layers", &mut c.n_layers)?;
        kv.read_into("n_heads", &mut c.n_heads)?;
        kv.read_into("ff_dim", &mut c.ff_dim)?;
        kv.read_into("head_hidden", &mut c.head_hidden)?;
        kv.read_into("n_fragments", &mut c.n_fragments)?;
        kv.read_into("max_words", &mut c.max_words)?;
        kv.read_into("dropout", &mut c.dropout)?;
        kv.read_into("seed", &mut c.seed)?;
        c.validate()?;
        Ok(c)
    }
}

/// One protein: its word embeddings (rows) and its observed labels.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub protein_id: String,
    pub words: Matrix,
    pub labels: Vec<(usize, bool)>,
}

/// Samples for every protein in `labels` with at least one observed label.
/// Proteins without word embeddings get an empty word list; longer word
/// lists are cut to `max_words`.
pub fn build_samples(
    labels: &LabelMatrix,
    words: &HashMap<String, Matrix>,
    embed_dim: usize,
    max_words: usize,
) -> Vec<Sample> {
    let mut out = Vec::new();
    for (i, p) in labels.proteins().iter().enumerate() {
        let row = labels.row(i);
        if row.is_empty() {
            continue;
        }
        let w = match words.get(p) {
            Some(m) => truncate_words(m, max_words),
            None => {
                warn!("protein {p} has no word embeddings");
                Matrix::zeros(0, embed_dim)
            }
        };
        out.push(Sample {
            protein_id: p.clone(),
            words: w,
            labels: row.to_vec(),
        });
    }
    out
}

pub fn truncate_words(m: &Matrix, max_words: usize) -> Matrix {
    if m.rows() <= max_words {
        return m.clone();
    }
    m.select_rows(&(0..max_words).collect::<Vec<_>>())
}

/// Word sequences padded to `max_words`, with labels and the observed mask.
#[derive(Debug, Clone)]
pub struct Batch {
    pub words: Vec<Matrix>,
    pub mask: Vec<Vec<bool>>,
    pub labels: Matrix,
    pub observed: Matrix,
}

impl Batch {
    pub fn from_samples(samples: &[&Sample], config: &ModelConfig) -> Result<Self> {
        let (d, mw, f) = (config.embed_dim, config.max_words, config.n_fragments);
        let mut labels = Matrix::zeros(samples.len(), f);
        let mut observed = Matrix::zeros(samples.len(), f);
        let mut words = Vec::with_capacity(samples.len());
        let mut mask = Vec::with_capacity(samples.len());
        for (b, s) in samples.iter().enumerate() {
            if s.words.cols() != d || s.words.rows() > mw {
                return Err(Error::Shape(format!(
                    "{}: {}x{} words for max_words {mw}, dim {d}",
                    s.protein_id,
                    s.words.rows(),
                    s.words.cols()
                )));
            }
            let mut padded = Matrix::zeros(mw, d);
            for r in 0..s.words.rows() {
                padded.row_mut(r).copy_from_slice(s.words.row(r));
            }
            words.push(padded);
            mask.push((0..mw).map(|r| r < s.words.rows()).collect());
            for &(j, y) in &s.labels {
                if j >= f {
                    return Err(Error::Index(format!("label column {j} with {f} fragments")));
                }
                observed[(b, j)] = 1.0;
                labels[(b, j)] = if y { 1.0 } else { 0.0 };
            }
        }
        Ok(Batch {
            words,
            mask,
            labels,
            observed,
        })
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }
}

/// Numerically stable per-entry BCE with logits.
pub fn bce_with_logits(z: f64, y: f64) -> f64 {
    z.max(0.0) - z * y + (-z.abs()).exp().ln_1p()
}

pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Mean BCE over observed entries; 0 (with a warning) when none is observed.
pub fn masked_bce_loss(logits: &Matrix, labels: &Matrix, observed: &Matrix) -> f64 {
    let mut sum = 0.0;
    let mut n = 0usize;
    for ((z, y), o) in logits.as_slice().iter().zip(labels.as_slice()).zip(observed.as_slice()) {
        if *o != 0.0 {
            sum += bce_with_logits(*z, *y);
            n += 1;
        }
    }
    if n == 0 {
        warn!("loss over a batch without observed labels");
        return 0.0;
    }
    sum / n as f64
}

/// d(masked_bce_loss)/d(logits).
pub fn masked_bce_grad(logits: &Matrix, labels: &Matrix, observed: &Matrix) -> Matrix {
    let n = observed.as_slice().iter().filter(|&&o| o != 0.0).count();
    let mut g = Matrix::zeros(logits.rows(), logits.cols());
    if n == 0 {
        return g;
    }
    for r in 0..logits.rows() {
        for c in 0..logits.cols() {
            if observed[(r, c)] != 0.0 {
                g[(r, c)] = (sigmoid(logits[(r, c)]) - labels[(r, c)]) / n as f64;
            }
        }
    }
    g
}

#[derive(Debug, Clone)]
pub struct Gradients {
    pub params: Vec<f64>,
    /// Per sample, same shape as the padded word matrix; zero on padding.
    pub inputs: Vec<Matrix>,
}

#[derive(Debug, Clone)]
pub struct Model {
    config: ModelConfig,
    layout: net::Layout,
    params: Vec<f64>,
    epoch: usize,
}

impl PartialEq for Model {
    fn eq(&self, other: &Self) -> bool {
        self.config == other.config && self.params == other.params && self.epoch == other.epoch
    }
}

fn compact(words: &Matrix, mask: &[bool]) -> Vec<f64> {
    let mut v = Vec::new();
    for (r, &m) in mask.iter().enumerate() {
        if m {
            v.extend_from_slice(words.row(r));
        }
    }
    v
}

impl Model {
    /// Randomly initialized model (seeded by `config.seed`).
    pub fn new(config: ModelConfig) -> Result<Self> {
        config.validate()?;
        let layout = net::Layout::new(&config);
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let params = layout.init(&mut rng);
        Ok(Model {
            config,
            layout,
            params,
            epoch: 0,
        })
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub fn param_specs(&self) -> &[TensorSpec] {
        &self.layout.specs
    }

    /// Epoch at which this state was saved by training.
    pub fn epoch(&self) -> usize {
        self.epoch
    }

    /// Zeroes the output layer, so every probability is 0.5.
    pub fn zero_head(&mut self) {
        let (w, b) = self.layout.head_output();
        let n = self.layout.hidden * self.layout.f;
        self.params[w..w + n].fill(0.0);
        self.params[b..b + self.layout.f].fill(0.0);
    }

    fn check_batch(&self, batch: &Batch) -> Result<()> {
        let (d, mw) = (self.config.embed_dim, self.config.max_words);
        for (w, m) in batch.words.iter().zip(&batch.mask) {
            if w.cols() != d || w.rows() != mw || m.len() != mw {
                return Err(Error::Shape(format!(
                    "batch entry is {}x{}, expected {mw}x{d}",
                    w.rows(),
                    w.cols()
                )));
            }
        }
        if batch.mask.len() != batch.words.len() {
            return Err(Error::Shape("mask and words differ in batch size".into()));
        }
        Ok(())
    }

    /// Logits (batch × fragments); dropout is off.
    pub fn forward(&self, batch: &Batch) -> Result<Matrix> {
        self.check_batch(batch)?;
        let rows: Vec<Vec<f64>> = batch
            .words
            .par_iter()
            .zip(&batch.mask)
            .map(|(w, m)| net::forward(&self.layout, &self.params, &compact(w, m), None).0)
            .collect();
        Matrix::from_rows(&rows)
    }

    /// Gradients of `Σ dlogits ⊙ logits` for parameters and inputs.
    pub fn backward(&self, batch: &Batch, dlogits: &Matrix) -> Result<Gradients> {
        self.check_batch(batch)?;
        if dlogits.rows() != batch.len() || dlogits.cols() != self.config.n_fragments {
            return Err(Error::Shape("dlogits shape does not match the batch".into()));
        }
        let parts: Vec<(Vec<f64>, Matrix)> = (0..batch.len())
            .into_par_iter()
            .map(|b| {
                let (w, m) = (&batch.words[b], &batch.mask[b]);
                let (_, cache) = net::forward(&self.layout, &self.params, &compact(w, m), None);
                let mut g = vec![0.0; self.params.len()];
                let dx = net::backward(&self.layout, &self.params, &cache, dlogits.row(b), &mut g);
                let mut dw = Matrix::zeros(w.rows(), w.cols());
                let d = self.config.embed_dim;
                let mut k = 0;
                for (r, &keep) in m.iter().enumerate() {
                    if keep {
                        dw.row_mut(r).copy_from_slice(&dx[k * d..(k + 1) * d]);
                        k += 1;
                    }
                }
                (g, dw)
            })
            .collect();
        let mut params = vec![0.0; self.params.len()];
        let mut inputs = Vec::with_capacity(parts.len());
        for (g, dw) in parts {
            params.iter_mut().zip(&g).for_each(|(a, b)| *a += b);
            inputs.push(dw);
        }
        Ok(Gradients { params, inputs })
    }

    fn check_words(&self, words: &Matrix) -> Result<()> {
        if words.cols() != self.config.embed_dim || words.rows() > self.config.max_words {
            return Err(Error::Shape(format!(
                "{}x{} words for max_words {}, dim {}",
                words.rows(),
                words.cols(),
                self.config.max_words,
                self.config.embed_dim
            )));
        }
        Ok(())
    }

    pub fn logits(&self, words: &Matrix) -> Result<Vec<f64>> {
        self.check_words(words)?;
        Ok(net::forward(&self.layout, &self.params, words.as_slice(), None).0)
    }

    /// Fragment probabilities for one protein.
    pub fn predict(&self, words: &Matrix) -> Result<Vec<f64>> {
        Ok(self.logits(words)?.into_iter().map(sigmoid).collect())
    }

    /// Logit of fragment `target` and its gradient with respect to `words`.
    pub fn logit_gradient(&self, words: &Matrix, target: usize) -> Result<(f64, Matrix)> {
        self.check_words(words)?;
        if target >= self.config.n_fragments {
            return Err(Error::Index(format!(
                "fragment {target} of {}",
                self.config.n_fragments
            )));
        }
        let (logits, cache) = net::forward(&self.layout, &self.params, words.as_slice(), None);
        let mut dl = vec![0.0; self.config.n_fragments];
        dl[target] = 1.0;
        let mut scratch = vec![0.0; self.params.len()];
        let dx = net::backward(&self.layout, &self.params, &cache, &dl, &mut scratch);
        Ok((logits[target], Matrix::from_vec(words.rows(), words.cols(), dx)?))
    }

    /// Versioned binary checkpoint: magic `PWCK`, the config as key=value
    /// text, the epoch, then named f32 tensors.
    pub fn save(&self, mut w: impl Write) -> Result<()> {
        w.write_all(CKPT_MAGIC)?;
        w.write_all(&CKPT_VERSION.to_le_bytes())?;
        write_string(&mut w, &self.config.to_kv().to_string())?;
        w.write_all(&(self.epoch as u32).to_le_bytes())?;
        w.write_all(&(self.layout.specs.len() as u32).to_le_bytes())?;
        for s in &self.layout.specs {
            write_string(&mut w, &s.name)?;
            w.write_all(&(s.shape.len() as u32).to_le_bytes())?;
            for &dim in &s.shape {
                w.write_all(&(dim as u32).to_le_bytes())?;
            }
            for &v in &self.params[s.offset..s.offset + s.len()] {
                w.write_all(&(v as f32).to_le_bytes())?;
            }
        }
        Ok(())
    }

    pub fn load(mut r: impl Read) -> Result<Self> {
        let fmt = |msg: String| Error::Format { kind: "PWCK", msg };
        expect_magic(&mut r, CKPT_MAGIC, "PWCK")?;
        let version = read_u32(&mut r)?;
        if version != CKPT_VERSION {
            return Err(fmt(format!("unsupported version {version}")));
        }
        let kv = KvConfig::parse(&read_string(&mut r, "PWCK")?)?;
        let config = ModelConfig::from_kv(&kv, &ModelConfig::new(1, 1))?;
        let mut model = Model::new(config)?;
        model.epoch = read_u32(&mut r)? as usize;
        let n = read_u32(&mut r)? as usize;
        if n != model.layout.specs.len() {
            return Err(fmt(format!("{n} tensors, expected {}", model.layout.specs.len())));
        }
        let by_name: HashMap<String, usize> = model
            .layout
            .specs
            .iter()
            .enumerate()
            .map(|(i, s)| (s.name.clone(), i))
            .collect();
        let mut seen = vec![false; n];
        for _ in 0..n {
            let name = read_string(&mut r, "PWCK")?;
            let i = *by_name
                .get(&name)
                .ok_or_else(|| fmt(format!("unexpected tensor {name}")))?;
            let ndim = read_u32(&mut r)? as usize;
            let mut shape = Vec::with_capacity(ndim);
            for _ in 0..ndim {
                shape.push(read_u32(&mut r)? as usize);
            }
            let spec = model.layout.specs[i].clone();
            if shape != spec.shape || seen[i] {
                return Err(fmt(format!(
                    "tensor {name} has shape {shape:?}, expected {:?}",
                    spec.shape
                )));
            }
            seen[i] = true;
            for k in 0..spec.len() {
                let v = read_f32(&mut r).map_err(|_| fmt("truncated tensor data".into()))?;
                model.params[spec.offset + k] = f64::from(v);
            }
        }
        Ok(model)
    }

    /// Rounds parameters to f32, matching what a checkpoint stores.
    pub fn round_to_f32(&mut self) {
        self.params.iter_mut().for_each(|v| *v = f64::from(*v as f32));
    }
}

const CKPT_MAGIC: &[u8; 4] = b"PWCK";
const CKPT_VERSION: u32 = 1;
