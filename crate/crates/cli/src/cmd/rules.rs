use std::path::PathBuf;

use anyhow::Result;
use clap::Subcommand;
use pwrules::attribution::{IgConfig, RuleRecord};
use pwrules::dataset::LabelMatrix;
use pwrules::fragment::FragmentLibrary;
use pwrules::io::{read_jsonl, write_jsonl};
use pwrules::pipeline::{extract_rules_for, group_words, merge_labels};
use pwrules::rulebase::{annotate_accuracy, filter_rules, ReferenceIndex, RuleDb};

use super::model::load_model;
use super::{dry_run_done, keys_by_protein, load_labels, load_library, load_words, load_words_with_embeddings, Global};
use crate::ctx::usage;

#[derive(Subcommand)]
pub enum Cmd {
    /// Integrated-gradients rules for every labelled protein
    Extract {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        words: PathBuf,
        #[arg(long)]
        embeddings: PathBuf,
        #[arg(long)]
        library: PathBuf,
        /// Label files; a protein in several keeps its first row. Repeatable
        #[arg(long, required = true)]
        labels: Vec<PathBuf>,
        /// rules.jsonl
        #[arg(long)]
        out: PathBuf,
        /// Integration steps
        #[arg(long)]
        steps: Option<usize>,
    },
    /// Fill in rule accuracy against reference labels
    Accuracy {
        #[arg(long)]
        rules: PathBuf,
        #[arg(long)]
        words: PathBuf,
        #[arg(long)]
        library: PathBuf,
        #[arg(long, required = true)]
        labels: Vec<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Keep rules with accuracy >= 0.5 and compile the lookup index
    Filter {
        #[arg(long)]
        rules: PathBuf,
        /// Filtered rules.jsonl
        #[arg(long)]
        out: PathBuf,
        /// Compiled rule database (PWDB)
        #[arg(long)]
        db: Option<PathBuf>,
    },
}

fn merged_labels(paths: &[PathBuf], lib: &FragmentLibrary) -> Result<LabelMatrix> {
    let parts: Vec<LabelMatrix> = paths.iter().map(|p| load_labels(p, lib)).collect::<Result<_>>()?;
    Ok(merge_labels(&parts.iter().collect::<Vec<_>>())?)
}

fn sort_rules(rules: &mut [RuleRecord]) {
    rules.sort_by(|a, b| {
        (&a.fragment_id, &a.word)
            .cmp(&(&b.fragment_id, &b.word))
            .then(a.rule_score.total_cmp(&b.rule_score))
    });
}

pub fn run(cmd: Cmd, g: &Global) -> Result<()> {
    match cmd {
        Cmd::Extract {
            model,
            words,
            embeddings,
            library,
            labels,
            out,
            steps,
        } => {
            let mut ctx = g.ctx("rules extract")?;
            ctx.require([&model, &words, &embeddings, &library])?;
            ctx.require(&labels)?;
            let steps = ctx.param("rules.steps", steps, IgConfig::default().steps)?;
            if steps < 2 {
                return Err(usage("rules.steps must be at least 2"));
            }
            let m = load_model(&model)?;
            let lib = load_library(&library)?;
            if m.config().n_fragments != lib.len() {
                return Err(usage(format!(
                    "checkpoint predicts {} fragments but the library has {}",
                    m.config().n_fragments,
                    lib.len()
                )));
            }
            let (w, e) = load_words_with_embeddings(&words, &embeddings)?;
            let groups = group_words(&w, &e)?;
            let reference = merged_labels(&labels, &lib)?;
            if g.dry_run {
                return dry_run_done(&[&out]);
            }
            let mut rules = extract_rules_for(&m, &groups, &reference, m.config().max_words, &IgConfig { steps })?;
            sort_rules(&mut rules);
            let mut o = ctx.outputs();
            o.text(&out, |wr| Ok(write_jsonl(wr, &rules)?))?;
            o.commit()?;
            println!("{} rules", rules.len());
            Ok(())
        }
        Cmd::Accuracy {
            rules,
            words,
            library,
            labels,
            out,
        } => {
            let ctx = g.ctx("rules accuracy")?;
            ctx.require([&rules, &words, &library])?;
            ctx.require(&labels)?;
            let lib = load_library(&library)?;
            let mut r: Vec<RuleRecord> = read_jsonl(&rules)?;
            let keys = keys_by_protein(&load_words(&words)?);
            let reference = merged_labels(&labels, &lib)?;
            if g.dry_run {
                return dry_run_done(&[&out]);
            }
            let index = ReferenceIndex::new(&keys, &reference);
            let undefined = annotate_accuracy(&mut r, &index);
            let mut o = ctx.outputs();
            o.text(&out, |w| Ok(write_jsonl(w, &r)?))?;
            o.commit()?;
            println!("{} rules; {undefined} without reference support", r.len());
            Ok(())
        }
        Cmd::Filter { rules, out, db } => {
            let ctx = g.ctx("rules filter")?;
            ctx.require([&rules])?;
            let r: Vec<RuleRecord> = read_jsonl(&rules)?;
            if g.dry_run {
                let mut outs = vec![out.as_path()];
                outs.extend(db.as_deref());
                return dry_run_done(&outs);
            }
            let n = r.len();
            let mut kept = filter_rules(r);
            sort_rules(&mut kept);
            let mut o = ctx.outputs();
            o.text(&out, |w| Ok(write_jsonl(w, &kept)?))?;
            if let Some(path) = &db {
                let compiled = RuleDb::new(kept.clone());
                o.binary(path, |w| Ok(compiled.write(w)?))?;
            }
            o.commit()?;
            println!("kept {} of {n} rules", kept.len());
            Ok(())
        }
    }
}
