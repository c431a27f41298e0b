//! Glue between stages: per-protein word tables and rule-extraction inputs.

use std::collections::{BTreeMap, HashMap};

use crate::attribution::{extract_all, IgConfig, LogitModel, ProteinInput, RuleRecord};
use crate::dataset::LabelMatrix;
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::model::truncate_words;
use crate::words::{word_embedding, ProteinWord};

/// One protein's words in segmentation order with their embeddings.
#[derive(Debug, Clone, PartialEq)]
pub struct ProteinWords {
    pub keys: Vec<String>,
    pub embeddings: Matrix,
}

/// Mean-pooled embedding of every word, one row per word.
pub fn embed_words(words: &[ProteinWord], residues: &HashMap<String, Matrix>) -> Result<Matrix> {
    let dim = match residues.values().next() {
        Some(m) => m.cols(),
        None if words.is_empty() => 0,
        None => return Err(Error::Value("no residue embeddings".into())),
    };
    let mut data = Vec::with_capacity(words.len() * dim);
    for w in words {
        let r = residues
            .get(&w.protein_id)
            .ok_or_else(|| Error::Value(format!("no residue embeddings for {}", w.protein_id)))?;
        if r.cols() != dim {
            return Err(Error::Shape(format!(
                "{}: embedding dim {} differs from {dim}",
                w.protein_id,
                r.cols()
            )));
        }
        data.extend(word_embedding(w, r)?);
    }
    Matrix::from_vec(words.len(), dim, data)
}

/// Words grouped by protein, keeping their relative order. `embeddings`
/// has one row per word.
pub fn group_words(words: &[ProteinWord], embeddings: &Matrix) -> Result<BTreeMap<String, ProteinWords>> {
    if embeddings.rows() != words.len() {
        return Err(Error::Shape(format!(
            "{} words but {} embedding rows",
            words.len(),
            embeddings.rows()
        )));
    }
    let mut rows: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    for (i, w) in words.iter().enumerate() {
        rows.entry(w.protein_id.as_str()).or_default().push(i);
    }
    Ok(rows
        .into_iter()
        .map(|(p, idx)| {
            (
                p.to_string(),
                ProteinWords {
                    keys: idx.iter().map(|&i| words[i].key.clone()).collect(),
                    embeddings: embeddings.select_rows(&idx),
                },
            )
        })
        .collect())
}

pub fn word_matrices(groups: &BTreeMap<String, ProteinWords>) -> HashMap<String, Matrix> {
    groups.iter().map(|(p, g)| (p.clone(), g.embeddings.clone())).collect()
}

pub fn word_keys(groups: &BTreeMap<String, ProteinWords>) -> BTreeMap<String, Vec<String>> {
    groups.iter().map(|(p, g)| (p.clone(), g.keys.clone())).collect()
}

/// Protein id, word keys, word matrix and label row.
type OwnedInput = (String, Vec<String>, Matrix, Vec<(usize, bool)>);

/// Rules for every labelled protein that has words. Word lists longer than
/// `max_words` are cut as in training.
pub fn extract_rules_for<M: LogitModel + ?Sized>(
    model: &M,
    groups: &BTreeMap<String, ProteinWords>,
    labels: &LabelMatrix,
    max_words: usize,
    config: &IgConfig,
) -> Result<Vec<RuleRecord>> {
    let mut owned: Vec<OwnedInput> = Vec::new();
    for (i, p) in labels.proteins().iter().enumerate() {
        let Some(g) = groups.get(p) else { continue };
        let words = truncate_words(&g.embeddings, max_words);
        let keys = g.keys[..words.rows()].to_vec();
        owned.push((p.clone(), keys, words, labels.row(i).to_vec()));
    }
    let inputs: Vec<ProteinInput<'_>> = owned
        .iter()
        .map(|(p, k, w, l)| ProteinInput {
            protein_id: p,
            word_keys: k,
            words: w,
            labels: l,
        })
        .collect();
    extract_all(model, &inputs, labels.fragments(), config)
}

/// Union of label matrices over the same fragment columns; a protein in
/// several keeps the first row seen.
pub fn merge_labels(parts: &[&LabelMatrix]) -> Result<LabelMatrix> {
    let Some(first) = parts.first() else {
        return Err(Error::EmptyDataset);
    };
    let mut out = LabelMatrix::new(first.fragments().to_vec());
    let mut seen = std::collections::HashSet::new();
    for m in parts {
        if m.fragments() != first.fragments() {
            return Err(Error::Shape("label matrices have different fragment columns".into()));
        }
        for (i, p) in m.proteins().iter().enumerate() {
            if seen.insert(p.clone()) {
                out.set_row(p, m.row(i).to_vec());
            }
        }
    }
    Ok(out)
}
