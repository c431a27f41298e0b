//! Integrated gradients over word embeddings and rule emission.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::model::{sigmoid, Model};

/// A differentiable map from a word matrix to per-fragment logits.
pub trait LogitModel: Sync {
    fn n_outputs(&self) -> usize;

    /// Logit `target` at `x` and its gradient with respect to `x`.
    fn logit_and_gradient(&self, x: &Matrix, target: usize) -> Result<(f64, Matrix)>;
}

impl LogitModel for Model {
    fn n_outputs(&self) -> usize {
        self.config().n_fragments
    }

    fn logit_and_gradient(&self, x: &Matrix, target: usize) -> Result<(f64, Matrix)> {
        self.logit_gradient(x, target)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IgConfig {
    pub steps: usize,
}

impl Default for IgConfig {
    fn default() -> Self {
        IgConfig { steps: 50 }
    }
}

#[derive(Debug, Clone)]
pub struct Attribution {
    /// Word × embedding-dimension attributions.
    pub values: Matrix,
    pub f_input: f64,
    pub f_baseline: f64,
    /// |Σ values − (f_input − f_baseline)|
    pub completeness_gap: f64,
}

/// Midpoint-rule integrated gradients of logit `target` along the straight
/// path from `baseline` to `x`.
pub fn integrated_gradients<M: LogitModel + ?Sized>(
    model: &M,
    x: &Matrix,
    baseline: &Matrix,
    target: usize,
    steps: usize,
) -> Result<Attribution> {
    if x.rows() != baseline.rows() || x.cols() != baseline.cols() {
        return Err(Error::Shape(format!(
            "input {}x{} vs baseline {}x{}",
            x.rows(),
            x.cols(),
            baseline.rows(),
            baseline.cols()
        )));
    }
    if steps < 2 {
        return Err(Error::Value(format!(
            "integrated gradients needs at least 2 steps, got {steps}"
        )));
    }
    let delta: Vec<f64> = x
        .as_slice()
        .iter()
        .zip(baseline.as_slice())
        .map(|(a, b)| a - b)
        .collect();
    let mut sum = vec![0.0; delta.len()];
    for k in 1..=steps {
        let alpha = (k as f64 - 0.5) / steps as f64;
        let point: Vec<f64> = baseline
            .as_slice()
            .iter()
            .zip(&delta)
            .map(|(b, d)| b + alpha * d)
            .collect();
        let (_, g) = model.logit_and_gradient(&Matrix::from_vec(x.rows(), x.cols(), point)?, target)?;
        sum.iter_mut().zip(g.as_slice()).for_each(|(s, gi)| *s += gi);
    }
    let values: Vec<f64> = sum.iter().zip(&delta).map(|(s, d)| d * s / steps as f64).collect();
    let (f_input, _) = model.logit_and_gradient(x, target)?;
    let (f_baseline, _) = model.logit_and_gradient(baseline, target)?;
    let total: f64 = values.iter().sum();
    Ok(Attribution {
        values: Matrix::from_vec(x.rows(), x.cols(), values)?,
        f_input,
        f_baseline,
        completeness_gap: (total - (f_input - f_baseline)).abs(),
    })
}

/// Per-word sums over the embedding dimension, scaled to unit L2 norm.
/// An all-zero vector is returned unchanged.
pub fn condense(attributions: &Matrix) -> Vec<f64> {
    let raw: Vec<f64> = (0..attributions.rows())
        .map(|r| attributions.row(r).iter().sum())
        .collect();
    let norm = raw.iter().map(|v| v * v).sum::<f64>().sqrt();
    if norm == 0.0 {
        return raw;
    }
    raw.into_iter().map(|v| v / norm).collect()
}

/// Indices of the highest positive scores whose running sum first exceeds
/// half of the total positive score. Ties go to the lower index.
pub fn select_words(scores: &[f64]) -> Result<Vec<usize>> {
    let mut pos: Vec<(usize, f64)> = scores.iter().copied().enumerate().filter(|&(_, s)| s > 0.0).collect();
    if pos.is_empty() {
        return Err(Error::NoPositiveAttribution);
    }
    pos.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    let total: f64 = pos.iter().map(|p| p.1).sum();
    let mut acc = 0.0;
    let mut out = Vec::new();
    for (i, s) in pos {
        out.push(i);
        acc += s;
        if acc > 0.5 * total {
            break;
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RuleRecord {
    pub word: String,
    pub fragment_id: String,
    pub pred_score: f64,
    pub attr_score: f64,
    pub rule_score: f64,
    /// Filled by rule-accuracy evaluation.
    #[serde(default)]
    pub accuracy: Option<f64>,
    /// Reference proteins with an observed label behind `accuracy`; zero
    /// marks an undefined accuracy.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub support: Option<usize>,
}

impl RuleRecord {
    pub fn new(word: &str, fragment_id: &str, pred_score: f64, attr_score: f64) -> Self {
        RuleRecord {
            word: word.to_string(),
            fragment_id: fragment_id.to_string(),
            pred_score,
            attr_score,
            rule_score: (pred_score * attr_score).sqrt(),
            accuracy: None,
            support: None,
        }
    }
}

/// One protein's inputs for rule extraction.
#[derive(Debug, Clone, Copy)]
pub struct ProteinInput<'a> {
    pub protein_id: &'a str,
    /// Word keys, parallel to the rows of `words`.
    pub word_keys: &'a [String],
    pub words: &'a Matrix,
    pub labels: &'a [(usize, bool)],
}

/// Rules for every fragment labelled privileged and predicted with
/// probability above 0.5. Fragments without positive attribution are
/// skipped.
pub fn extract_rules<M: LogitModel + ?Sized>(
    model: &M,
    input: &ProteinInput<'_>,
    fragment_ids: &[String],
    config: &IgConfig,
) -> Result<Vec<RuleRecord>> {
    if input.word_keys.len() != input.words.rows() {
        return Err(Error::Shape(format!(
            "{}: {} word keys for {} embedding rows",
            input.protein_id,
            input.word_keys.len(),
            input.words.rows()
        )));
    }
    let baseline = Matrix::zeros(input.words.rows(), input.words.cols());
    let mut out = Vec::new();
    for &(j, label) in input.labels {
        if !label {
            continue;
        }
        let fid = fragment_ids
            .get(j)
            .ok_or_else(|| Error::Index(format!("fragment column {j} of {}", fragment_ids.len())))?;
        let (logit, _) = model.logit_and_gradient(input.words, j)?;
        let pred = sigmoid(logit);
        if pred <= 0.5 {
            continue;
        }
        let ig = integrated_gradients(model, input.words, &baseline, j, config.steps)?;
        let scores = condense(&ig.values);
        let chosen = match select_words(&scores) {
            Ok(c) => c,
            Err(Error::NoPositiveAttribution) => {
                log::debug!("{}: no positive attribution for {fid}", input.protein_id);
                continue;
            }
            Err(e) => return Err(e),
        };
        for w in chosen {
            out.push(RuleRecord::new(&input.word_keys[w], fid, pred, scores[w]));
        }
    }
    Ok(out)
}

/// Rules over many proteins, in input order.
pub fn extract_all<M: LogitModel + ?Sized>(
    model: &M,
    inputs: &[ProteinInput<'_>],
    fragment_ids: &[String],
    config: &IgConfig,
) -> Result<Vec<RuleRecord>> {
    let parts: Vec<Result<Vec<RuleRecord>>> = inputs
        .par_iter()
        .map(|p| extract_rules(model, p, fragment_ids, config))
        .collect();
    let mut out = Vec::new();
    for p in parts {
        out.extend(p?);
    }
    Ok(out)
}

/// One record per (word, fragment): the instance with the highest
/// rule_score. Output is sorted by fragment id, then word.
pub fn collapse_rules(rules: Vec<RuleRecord>) -> Vec<RuleRecord> {
    let mut best: BTreeMap<(String, String), RuleRecord> = BTreeMap::new();
    for r in rules {
        let key = (r.fragment_id.clone(), r.word.clone());
        match best.get(&key) {
            Some(b) if b.rule_score >= r.rule_score => {}
            _ => {
                best.insert(key, r);
            }
        }
    }
    best.into_values().collect()
}
