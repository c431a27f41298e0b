pub mod data;
pub mod fragments;
pub mod model;
pub mod rules;
pub mod screen;
pub mod structval;
pub mod synth;
pub mod words;

use std::collections::{BTreeMap, HashSet};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use pwrules::dataset::LabelMatrix;
use pwrules::fragment::FragmentLibrary;
use pwrules::io::{data_lines, open, read_jsonl, read_scores_tsv};
use pwrules::matrix::Matrix;
use pwrules::words::{read_embeddings, ProteinWord};

use crate::ctx::Ctx;

pub struct Global {
    pub config: Option<PathBuf>,
    pub seed: Option<u64>,
    pub dry_run: bool,
}

impl Global {
    pub fn ctx(&self, command: &str) -> Result<Ctx> {
        if let Some(c) = &self.config {
            if !c.exists() {
                return Err(crate::ctx::usage(format!("missing config file: {}", c.display())));
            }
        }
        Ctx::new(command, self.config.as_deref(), self.seed)
    }
}

/// Reports what a dry run would have written.
pub fn dry_run_done(outputs: &[&Path]) -> Result<()> {
    let list: Vec<String> = outputs.iter().map(|p| p.display().to_string()).collect();
    println!("dry run: inputs valid; would write {}", list.join(", "));
    Ok(())
}

pub fn load_library(path: &Path) -> Result<FragmentLibrary> {
    FragmentLibrary::read_jsonl(path).with_context(|| format!("reading fragment library {}", path.display()))
}

pub fn load_words(path: &Path) -> Result<Vec<ProteinWord>> {
    read_jsonl(path).with_context(|| format!("reading words {}", path.display()))
}

/// Words and their embedding rows, which must line up.
pub fn load_words_with_embeddings(words: &Path, embeddings: &Path) -> Result<(Vec<ProteinWord>, Matrix)> {
    let w = load_words(words)?;
    let e =
        read_embeddings(open(embeddings)?).with_context(|| format!("reading embeddings {}", embeddings.display()))?;
    if e.rows() != w.len() {
        bail!(
            "{} has {} rows but {} lists {} words",
            embeddings.display(),
            e.rows(),
            words.display(),
            w.len()
        );
    }
    Ok((w, e))
}

pub fn fragment_ids(lib: &FragmentLibrary) -> Vec<String> {
    lib.fragments().iter().map(|f| f.fragment_id.clone()).collect()
}

pub fn load_labels(path: &Path, lib: &FragmentLibrary) -> Result<LabelMatrix> {
    LabelMatrix::read_tsv(open(path)?, path, &fragment_ids(lib))
        .with_context(|| format!("reading labels {}", path.display()))
}

/// Word keys per protein, in file order.
pub fn keys_by_protein(words: &[ProteinWord]) -> BTreeMap<String, Vec<String>> {
    let mut out: BTreeMap<String, Vec<String>> = BTreeMap::new();
    for w in words {
        out.entry(w.protein_id.clone()).or_default().push(w.key.clone());
    }
    out
}

/// One id per line (first tab-separated column).
pub fn read_ids(path: &Path) -> Result<HashSet<String>> {
    let mut out = HashSet::new();
    for item in data_lines(open(path)?) {
        let (_, line) = item?;
        let id = line.split('\t').next().unwrap_or("").trim();
        if !id.is_empty() {
            out.insert(id.to_string());
        }
    }
    Ok(out)
}

/// `molecule_id<TAB>score` rows, or the ranked screen table.
pub fn read_score_table(path: &Path) -> Result<Vec<(String, f64)>> {
    let first = data_lines(open(path)?).next().transpose()?;
    if first.is_some_and(|(_, l)| l.starts_with("rank\tmolecule_id\t")) {
        let mut out = Vec::new();
        for item in data_lines(open(path)?).skip(1) {
            let (n, line) = item?;
            let cols: Vec<&str> = line.split('\t').collect();
            if cols.len() < 3 {
                bail!("{}:{n}: expected rank, molecule_id, pwscore", path.display());
            }
            let v: f64 = cols[2]
                .parse()
                .with_context(|| format!("{}:{n}: bad score {:?}", path.display(), cols[2]))?;
            out.push((cols[1].to_string(), v));
        }
        Ok(out)
    } else {
        Ok(read_scores_tsv(path)?)
    }
}
