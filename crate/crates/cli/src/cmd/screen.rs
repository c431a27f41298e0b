use std::path::PathBuf;

use anyhow::{Context, Result};
use clap::Subcommand;
use log::warn;
use pwrules::chem::{parse_smiles, Molecule};
use pwrules::io::{open, read_molecules_tsv, write_jsonl};
use pwrules::metrics::rank_by_score;
use pwrules::rulebase::{predict_privileged, Aggregation, RuleDb};
use pwrules::screening::{
    metric_report, rank_results, score_fragments, screen, write_screen_tsv, zscore_fuse, Orientation, DEFAULT_CAP,
};

use super::{dry_run_done, load_library, load_words, read_ids, read_score_table, Global};
use crate::ctx::usage;

#[derive(Subcommand)]
pub enum Cmd {
    /// Rank molecules by PWScore for one query protein
    Score {
        /// Compiled rules (PWDB)
        #[arg(long)]
        db: PathBuf,
        #[arg(long)]
        library: PathBuf,
        /// Molecules to screen, id<TAB>smiles
        #[arg(long)]
        molecules: PathBuf,
        /// Segmented query words (words.jsonl)
        #[arg(long)]
        query_words: PathBuf,
        /// Query protein id; needed when --query-words holds several
        #[arg(long)]
        protein: Option<String>,
        /// joint, max or avg
        #[arg(long)]
        method: Option<String>,
        /// Privileged-call threshold on the aggregated score
        #[arg(long)]
        threshold: Option<f64>,
        /// Per-atom coverage cap
        #[arg(long)]
        cap: Option<usize>,
        /// Ranked screen TSV
        #[arg(long)]
        out: PathBuf,
        /// Fragment predictions as JSONL
        #[arg(long)]
        predictions: Option<PathBuf>,
    },
    /// Average of per-method z-scores
    Fuse {
        #[arg(long)]
        a: PathBuf,
        #[arg(long)]
        b: PathBuf,
        #[arg(long, default_value = "higher")]
        orientation_a: Orientation,
        #[arg(long, default_value = "higher")]
        orientation_b: Orientation,
        /// molecule_id<TAB>score, best first
        #[arg(long)]
        out: PathBuf,
    },
    /// Enrichment factors, AUC and optionally precision/MCC
    Metrics {
        /// Screen TSV or molecule_id<TAB>score
        #[arg(long)]
        scores: PathBuf,
        /// Active molecule ids, one per line
        #[arg(long)]
        actives: PathBuf,
        #[arg(long, default_value = "higher")]
        orientation: Orientation,
        /// Call threshold for precision and MCC
        #[arg(long)]
        threshold: Option<f64>,
        /// JSON report
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

pub fn run(cmd: Cmd, g: &Global) -> Result<()> {
    match cmd {
        Cmd::Score {
            db,
            library,
            molecules,
            query_words,
            protein,
            method,
            threshold,
            cap,
            out,
            predictions,
        } => {
            let mut ctx = g.ctx("screen score")?;
            ctx.require([&db, &library, &molecules, &query_words])?;
            let method: Aggregation = ctx
                .param("screen.method", method, Aggregation::default().to_string())?
                .parse()
                .map_err(|e: pwrules::Error| usage(e.to_string()))?;
            let threshold = ctx.param("screen.threshold", threshold, 0.5)?;
            let cap = ctx.param("screen.cap", cap, DEFAULT_CAP)?;
            if cap == 0 {
                return Err(usage("screen.cap must be at least 1"));
            }
            let rules = RuleDb::read(open(&db)?).with_context(|| format!("reading {}", db.display()))?;
            let lib = load_library(&library)?;
            let words = load_words(&query_words)?;
            let mut ids: Vec<&str> = words.iter().map(|w| w.protein_id.as_str()).collect();
            ids.dedup();
            let target = match (&protein, ids.as_slice()) {
                (Some(p), _) => p.clone(),
                (None, [one]) => one.to_string(),
                (None, []) => return Err(usage(format!("{} holds no words", query_words.display()))),
                (None, _) => return Err(usage("--query-words holds several proteins; pick one with --protein")),
            };
            ctx.record("screen.protein", &target);
            let keys: Vec<String> = words
                .iter()
                .filter(|w| w.protein_id == target)
                .map(|w| w.key.clone())
                .collect();
            if keys.is_empty() {
                warn!("no words for {target}; every score will be 0");
            }
            let mut mols: Vec<(String, Molecule)> = Vec::new();
            for (id, s) in read_molecules_tsv(&molecules)? {
                match parse_smiles(&s) {
                    Ok(m) => mols.push((id, m)),
                    Err(e) => warn!("{id}: {e}; skipped"),
                }
            }
            if g.dry_run {
                let mut outs = vec![out.as_path()];
                outs.extend(predictions.as_deref());
                return dry_run_done(&outs);
            }
            let preds = predict_privileged(&keys, &rules, method, threshold);
            let scored = score_fragments(&preds, &lib)?;
            let mut results = screen(&mols, &scored, &lib, cap)?;
            rank_results(&mut results);
            let mut o = ctx.outputs();
            o.text(&out, |w| Ok(write_screen_tsv(w, &results)?))?;
            if let Some(path) = &predictions {
                o.text(path, |w| Ok(write_jsonl(w, &preds)?))?;
            }
            o.commit()?;
            println!(
                "{} molecules scored; {} privileged fragments",
                results.len(),
                preds.iter().filter(|p| p.privileged).count()
            );
            Ok(())
        }
        Cmd::Fuse {
            a,
            b,
            orientation_a,
            orientation_b,
            out,
        } => {
            let mut ctx = g.ctx("screen fuse")?;
            ctx.require([&a, &b])?;
            ctx.record("screen.orientation_a", orientation_a);
            ctx.record("screen.orientation_b", orientation_b);
            let sa = read_score_table(&a)?;
            let sb = read_score_table(&b)?;
            if g.dry_run {
                return dry_run_done(&[&out]);
            }
            let fused = zscore_fuse(&sa, &sb, orientation_a, orientation_b)?;
            let order = rank_by_score(&fused, true);
            let by_id: std::collections::HashMap<&str, f64> = fused.iter().map(|(k, v)| (k.as_str(), *v)).collect();
            let mut o = ctx.outputs();
            o.text(&out, |w| {
                for id in &order {
                    writeln!(w, "{id}\t{}", by_id[id.as_str()])?;
                }
                Ok(())
            })?;
            o.commit()?;
            println!("{} molecules fused", fused.len());
            Ok(())
        }
        Cmd::Metrics {
            scores,
            actives,
            orientation,
            threshold,
            out,
        } => {
            let mut ctx = g.ctx("screen metrics")?;
            ctx.require([&scores, &actives])?;
            ctx.record("screen.orientation", orientation);
            if let Some(t) = threshold {
                ctx.record("screen.call_threshold", t);
            }
            let s = read_score_table(&scores)?;
            let act = read_ids(&actives)?;
            if g.dry_run {
                return dry_run_done(&out.iter().map(|p| p.as_path()).collect::<Vec<_>>());
            }
            let r = metric_report(&s, &act, orientation, threshold)?;
            println!("ef_0_5pct = {:?}", r.ef_0_5pct);
            println!("ef_1pct = {:?}", r.ef_1pct);
            println!("ef_5pct = {:?}", r.ef_5pct);
            let opt = |v: Option<f64>| v.map_or("NA".to_string(), |x| format!("{x:?}"));
            println!("auc = {}", opt(r.auc));
            println!("precision = {}", opt(r.precision));
            println!("mcc = {}", opt(r.mcc));
            println!("n_actives = {}", r.n_actives);
            println!("n_total = {}", r.n_total);
            if let Some(path) = &out {
                let mut o = ctx.outputs();
                o.json(path, &r)?;
                o.commit()?;
            }
            Ok(())
        }
    }
}
