use std::collections::HashMap;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use clap::Subcommand;
use pwrules::io::open;
use pwrules::matrix::Matrix;
use pwrules::model::{build_samples, train, write_log_tsv, Model, ModelConfig, TrainConfig, ValidationSet};
use pwrules::pipeline::{group_words, word_matrices};

use super::{dry_run_done, fragment_ids, load_labels, load_library, load_words_with_embeddings, Global};
use crate::ctx::usage;

#[derive(Subcommand)]
pub enum Cmd {
    /// Train the privileged-fragment classifier
    Train {
        #[arg(long)]
        words: PathBuf,
        #[arg(long)]
        embeddings: PathBuf,
        /// Fixes the label columns
        #[arg(long)]
        library: PathBuf,
        #[arg(long)]
        train_labels: PathBuf,
        /// Validation labels as NAME=PATH; repeatable
        #[arg(long = "val-labels", value_parser = parse_named)]
        val_labels: Vec<(String, PathBuf)>,
        /// Checkpoint (PWCK)
        #[arg(long)]
        out: PathBuf,
        /// Per-epoch log TSV
        #[arg(long)]
        log: Option<PathBuf>,
        #[arg(long)]
        lr: Option<f64>,
        #[arg(long)]
        batch_size: Option<usize>,
        #[arg(long)]
        max_epochs: Option<usize>,
    },
    /// Privileged-fragment probabilities per protein
    Predict {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        words: PathBuf,
        #[arg(long)]
        embeddings: PathBuf,
        #[arg(long)]
        library: PathBuf,
        /// protein_id<TAB>fragment_id<TAB>probability
        #[arg(long)]
        out: PathBuf,
    },
}

fn parse_named(s: &str) -> Result<(String, PathBuf), String> {
    match s.split_once('=') {
        Some((n, p)) if !n.is_empty() && !p.is_empty() => Ok((n.to_string(), PathBuf::from(p))),
        _ => Err(format!("expected NAME=PATH, got {s:?}")),
    }
}

/// Word matrices per protein.
fn protein_words(words: &Path, embeddings: &Path) -> Result<HashMap<String, Matrix>> {
    let (w, e) = load_words_with_embeddings(words, embeddings)?;
    Ok(word_matrices(&group_words(&w, &e)?))
}

pub fn load_model(path: &Path) -> Result<Model> {
    Model::load(open(path)?).with_context(|| format!("reading checkpoint {}", path.display()))
}

pub fn run(cmd: Cmd, g: &Global) -> Result<()> {
    match cmd {
        Cmd::Train {
            words,
            embeddings,
            library,
            train_labels,
            val_labels,
            out,
            log,
            lr,
            batch_size,
            max_epochs,
        } => {
            let mut ctx = g.ctx("model train")?;
            ctx.require([&words, &embeddings, &library, &train_labels])?;
            ctx.require(val_labels.iter().map(|(_, p)| p))?;
            let lib = load_library(&library)?;
            let matrices = protein_words(&words, &embeddings)?;
            let dim = matrices.values().next().map_or(0, |m| m.cols());
            if dim == 0 {
                return Err(usage(format!("{} holds no word embeddings", embeddings.display())));
            }

            let mut base = ModelConfig::new(dim, lib.len());
            base.seed = ctx.seed;
            let mut mc =
                ModelConfig::from_kv(&ctx.section("model"), &base).map_err(|e| usage(format!("[model]: {e}")))?;
            // these follow from the inputs, whatever the config says
            mc.embed_dim = dim;
            mc.n_fragments = lib.len();
            mc.validate().map_err(|e| usage(format!("[model]: {e}")))?;
            let mut tc = TrainConfig::from_kv(&ctx.section("train"), &TrainConfig::default())
                .map_err(|e| usage(format!("[train]: {e}")))?;
            tc.lr = ctx.param("train.lr", lr, tc.lr)?;
            tc.batch_size = ctx.param("train.batch_size", batch_size, tc.batch_size)?;
            tc.max_epochs = ctx.param("train.max_epochs", max_epochs, tc.max_epochs)?;
            if tc.batch_size == 0 || tc.max_epochs == 0 {
                return Err(usage("batch_size and max_epochs must be positive"));
            }
            for (prefix, kv) in [("model", mc.to_kv()), ("train", tc.to_kv())] {
                for k in kv.keys() {
                    ctx.record(&format!("{prefix}.{k}"), kv.get_str(k).unwrap_or_default());
                }
            }

            let train_samples = build_samples(&load_labels(&train_labels, &lib)?, &matrices, dim, mc.max_words);
            let mut val = Vec::new();
            for (name, p) in &val_labels {
                val.push(ValidationSet {
                    name: name.clone(),
                    samples: build_samples(&load_labels(p, &lib)?, &matrices, dim, mc.max_words),
                });
            }
            if g.dry_run {
                let mut outs = vec![out.as_path()];
                outs.extend(log.as_deref());
                return dry_run_done(&outs);
            }
            let outcome = train(&mc, &tc, &train_samples, &val)?;
            let mut o = ctx.outputs();
            o.binary(&out, |w| Ok(outcome.model.save(w)?))?;
            if let Some(path) = &log {
                o.text(path, |w| Ok(write_log_tsv(w, &outcome)?))?;
            }
            o.commit()?;
            println!(
                "best epoch {} of {} (mean validation MCC {:.4}){}",
                outcome.best_epoch,
                outcome.log.len(),
                outcome.best_score,
                if outcome.stopped_early { ", stopped early" } else { "" }
            );
            Ok(())
        }
        Cmd::Predict {
            model,
            words,
            embeddings,
            library,
            out,
        } => {
            let ctx = g.ctx("model predict")?;
            ctx.require([&model, &words, &embeddings, &library])?;
            let m = load_model(&model)?;
            let lib = load_library(&library)?;
            if m.config().n_fragments != lib.len() {
                return Err(usage(format!(
                    "checkpoint predicts {} fragments but the library has {}",
                    m.config().n_fragments,
                    lib.len()
                )));
            }
            let matrices = protein_words(&words, &embeddings)?;
            if g.dry_run {
                return dry_run_done(&[&out]);
            }
            let ids = fragment_ids(&lib);
            let mut proteins: Vec<&String> = matrices.keys().collect();
            proteins.sort();
            let mut rows = Vec::new();
            for p in proteins {
                let x = pwrules::model::truncate_words(&matrices[p], m.config().max_words);
                rows.push((p.clone(), m.predict(&x)?));
            }
            let mut o = ctx.outputs();
            o.text(&out, |w| {
                writeln!(w, "protein_id\tfragment_id\tprobability")?;
                for (p, probs) in &rows {
                    for (f, v) in ids.iter().zip(probs) {
                        writeln!(w, "{p}\t{f}\t{v}")?;
                    }
                }
                Ok(())
            })?;
            o.commit()?;
            println!("{} proteins", rows.len());
            Ok(())
        }
    }
}
