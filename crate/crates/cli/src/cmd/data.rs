use std::collections::{BTreeSet, HashMap};
use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::{Subcommand, ValueEnum};
use pwrules::dataset::{
    dedup_all, ingest, label_matrix, split, AffinityRecord, DedupPolicy, Interaction, ProteinRecord, SplitMode,
    SplitSpec, Splits,
};
use pwrules::io::{open, read_jsonl, write_jsonl};

use super::{dry_run_done, load_library, Global};
use crate::ctx::usage;

#[derive(Clone, Copy, ValueEnum)]
pub enum Policy {
    SourceFirst,
    TypeFirst,
}

#[derive(Subcommand)]
pub enum Cmd {
    /// Validate, canonicalize and deduplicate affinity records
    Ingest {
        /// affinity.jsonl
        #[arg(long)]
        affinity: PathBuf,
        /// proteins.jsonl
        #[arg(long)]
        proteins: PathBuf,
        /// Deduplicated records (affinity.jsonl format)
        #[arg(long)]
        out: PathBuf,
        /// Distinct ligands as id<TAB>smiles
        #[arg(long)]
        ligands: Option<PathBuf>,
        /// Rejected records as JSONL
        #[arg(long)]
        rejected: Option<PathBuf>,
        #[arg(long, value_enum)]
        policy: Option<Policy>,
    },
    /// Privileged-fragment labels for (a subset of) the records
    Label {
        #[arg(long)]
        records: PathBuf,
        #[arg(long)]
        library: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// splits.json from `data split`; requires --set
        #[arg(long, requires = "set")]
        splits: Option<PathBuf>,
        /// Set name within --splits, e.g. train or val
        #[arg(long, requires = "splits")]
        set: Option<String>,
        /// Proteins with fewer actives get no positive labels
        #[arg(long)]
        min_actives: Option<usize>,
    },
    /// Partition (protein, ligand) pairs into train/val/test
    Split {
        #[arg(long)]
        records: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// novel_protein, novel_ligand or novel_complex
        #[arg(long)]
        mode: Option<String>,
    },
}

fn policy_name(p: DedupPolicy) -> &'static str {
    match p {
        DedupPolicy::SourceFirst => "source-first",
        DedupPolicy::TypeFirst => "type-first",
    }
}

fn parse_mode(s: &str) -> Result<SplitMode> {
    SplitMode::ALL.into_iter().find(|m| m.name() == s).ok_or_else(|| {
        usage(format!(
            "unknown split mode {s:?} (novel_protein|novel_ligand|novel_complex)"
        ))
    })
}

pub fn run(cmd: Cmd, g: &Global) -> Result<()> {
    match cmd {
        Cmd::Ingest {
            affinity,
            proteins,
            out,
            ligands,
            rejected,
            policy,
        } => {
            let mut ctx = g.ctx("data ingest")?;
            ctx.require([&affinity, &proteins])?;
            let flag = policy.map(|p| match p {
                Policy::SourceFirst => "source-first".to_string(),
                Policy::TypeFirst => "type-first".to_string(),
            });
            let name = ctx.param("data.policy", flag, policy_name(DedupPolicy::default()).to_string())?;
            let policy = match name.as_str() {
                "source-first" => DedupPolicy::SourceFirst,
                "type-first" => DedupPolicy::TypeFirst,
                other => {
                    return Err(usage(format!(
                        "unknown dedup policy {other:?} (source-first|type-first)"
                    )))
                }
            };
            let records: Vec<AffinityRecord> = read_jsonl(&affinity)?;
            let seqs: HashMap<String, String> = read_jsonl::<ProteinRecord>(&proteins)?
                .into_iter()
                .map(|p| (p.protein_id, p.sequence))
                .collect();
            if g.dry_run {
                let mut outs = vec![out.as_path()];
                outs.extend(ligands.as_deref());
                outs.extend(rejected.as_deref());
                return dry_run_done(&outs);
            }
            let report = ingest(records, &seqs)?;
            let kept = dedup_all(&report.records, policy);
            let mut o = ctx.outputs();
            o.text(&out, |w| Ok(write_jsonl(w, &kept)?))?;
            if let Some(path) = &ligands {
                let distinct: BTreeSet<&str> = kept.iter().map(|r| r.smiles.as_str()).collect();
                o.text(path, |w| {
                    for (i, s) in distinct.iter().enumerate() {
                        writeln!(w, "L{:06}\t{s}", i + 1)?;
                    }
                    Ok(())
                })?;
            }
            if let Some(path) = &rejected {
                o.text(path, |w| Ok(write_jsonl(w, &report.rejected)?))?;
            }
            o.commit()?;
            println!(
                "{} records kept after deduplication; {} rejected; {} dropped as too long",
                kept.len(),
                report.rejected.len(),
                report.dropped_long
            );
            Ok(())
        }
        Cmd::Label {
            records,
            library,
            out,
            splits,
            set,
            min_actives,
        } => {
            let mut ctx = g.ctx("data label")?;
            ctx.require([&records, &library])?;
            ctx.require(splits.iter())?;
            let min_actives = ctx.param("data.min_actives", min_actives, 1)?;
            let lib = load_library(&library)?;
            let all: Vec<AffinityRecord> = read_jsonl(&records)?;
            let interactions: Vec<Interaction> = match (&splits, &set) {
                (Some(path), Some(name)) => {
                    ctx.record("data.set", name);
                    let s: Splits = serde_json::from_reader(open(path)?)
                        .with_context(|| format!("reading splits {}", path.display()))?;
                    let idx = s
                        .get(name)
                        .ok_or_else(|| usage(format!("{} has no set {name:?}", path.display())))?;
                    let mut v = Vec::with_capacity(idx.len());
                    for &i in idx {
                        match all.get(i) {
                            Some(r) => v.push(Interaction::from(r)),
                            None => bail!(
                                "split index {i} outside {} records; were the splits made from this file?",
                                all.len()
                            ),
                        }
                    }
                    v
                }
                _ => all.iter().map(Interaction::from).collect(),
            };
            if g.dry_run {
                return dry_run_done(&[&out]);
            }
            let labels = label_matrix(&interactions, &lib, min_actives)?;
            let mut o = ctx.outputs();
            o.text(&out, |w| Ok(labels.write_tsv(w)?))?;
            o.commit()?;
            println!(
                "{} proteins, {} observed labels, {} positive",
                labels.proteins().len(),
                labels.n_observed(),
                labels.n_positive()
            );
            Ok(())
        }
        Cmd::Split { records, out, mode } => {
            let mut ctx = g.ctx("data split")?;
            ctx.require([&records])?;
            let mode = parse_mode(&ctx.param("data.mode", mode, SplitMode::NovelProtein.name().to_string())?)?;
            let all: Vec<AffinityRecord> = read_jsonl(&records)?;
            let pairs: Vec<(String, String)> = all.iter().map(|r| (r.protein_id.clone(), r.smiles.clone())).collect();
            if g.dry_run {
                return dry_run_done(&[&out]);
            }
            let s = split(&pairs, &SplitSpec::new(mode, ctx.seed))?;
            let mut o = ctx.outputs();
            o.json(&out, &s)?;
            o.commit()?;
            let sizes: Vec<String> = s.sets.iter().map(|(k, v)| format!("{k} {}", v.len())).collect();
            println!("{}", sizes.join(", "));
            Ok(())
        }
    }
}
