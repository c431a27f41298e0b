use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use clap::Subcommand;
use log::warn;
use pwrules::attribution::RuleRecord;
use pwrules::chem::{parse_smiles, Molecule};
use pwrules::io::{open, read_jsonl};
use pwrules::structval::{
    complex_distances, parse_manifest, parse_mol, parse_pdb, random_control, report, rule_distances, Complex,
    PairDistance, PairSource,
};

use super::{dry_run_done, load_library, Global};
use crate::ctx::usage;

#[derive(Subcommand)]
pub enum Cmd {
    /// Word-to-fragment distances for rules versus random pairs in solved complexes
    Run {
        /// complex_id, pdb_path, mol_path, ligand_smiles (tab-separated);
        /// relative paths resolve against the manifest's directory
        #[arg(long)]
        manifest: PathBuf,
        /// Rules (rules.jsonl)
        #[arg(long)]
        rules: PathBuf,
        #[arg(long)]
        library: PathBuf,
        /// Per-pair distances TSV
        #[arg(long)]
        out: PathBuf,
        /// Summary and Mann-Whitney test as JSON
        #[arg(long)]
        report: PathBuf,
        /// Random pairs drawn for the control
        #[arg(long)]
        n_random: Option<usize>,
    },
}

fn resolve(base: &Path, p: &str) -> PathBuf {
    let p = Path::new(p);
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        base.join(p)
    }
}

fn load_complexes(manifest: &Path) -> Result<Vec<Complex>> {
    let entries = parse_manifest(open(manifest)?, manifest)?;
    let base = manifest.parent().unwrap_or(Path::new("."));
    let mut paths = Vec::new();
    for e in &entries {
        paths.push(resolve(base, &e.pdb_path));
        paths.push(resolve(base, &e.mol_path));
    }
    if let Some(p) = paths.iter().find(|p| !p.exists()) {
        return Err(usage(format!("missing input: {}", p.display())));
    }
    let mut out = Vec::with_capacity(entries.len());
    for e in entries {
        let pdb = resolve(base, &e.pdb_path);
        let chains = parse_pdb(open(&pdb)?, &pdb)?;
        let mol = resolve(base, &e.mol_path);
        let ligand = parse_mol(open(&mol)?, &mol)?;
        let reference = match parse_smiles(&e.ligand_smiles) {
            Ok(m) => Some(m),
            Err(err) => {
                warn!(
                    "{}: ligand SMILES unusable ({err}); matching on the connection table",
                    e.complex_id
                );
                None
            }
        };
        out.push(Complex::new(&e.complex_id, chains, ligand, reference));
    }
    Ok(out)
}

fn source_name(s: PairSource) -> &'static str {
    match s {
        PairSource::Rule => "rule",
        PairSource::Random => "random",
    }
}

pub fn run(cmd: Cmd, g: &Global) -> Result<()> {
    match cmd {
        Cmd::Run {
            manifest,
            rules,
            library,
            out,
            report: report_path,
            n_random,
        } => {
            let mut ctx = g.ctx("structval run")?;
            ctx.require([&manifest, &rules, &library])?;
            let n_random = ctx.param("structval.n_random", n_random, 1000)?;
            let complexes = load_complexes(&manifest)?;
            let lib = load_library(&library)?;
            let r: Vec<RuleRecord> = read_jsonl(&rules)?;
            let pairs: BTreeSet<(String, String)> = r.iter().map(|x| (x.word.clone(), x.fragment_id.clone())).collect();
            let mut fragments: BTreeMap<String, Molecule> = BTreeMap::new();
            for (_, fid) in &pairs {
                if fragments.contains_key(fid) {
                    continue;
                }
                let f = lib
                    .get(fid)
                    .ok_or_else(|| anyhow::anyhow!("rule fragment {fid} is not in {}", library.display()))?;
                let m = parse_smiles(&f.smiles).with_context(|| format!("fragment {fid}"))?;
                fragments.insert(fid.clone(), m);
            }
            if g.dry_run {
                return dry_run_done(&[&out, &report_path]);
            }

            let rule_d = rule_distances(&complexes, &pairs, &fragments)?;
            let words: Vec<String> = pairs
                .iter()
                .map(|(w, _)| w.clone())
                .collect::<BTreeSet<_>>()
                .into_iter()
                .collect();
            let frag_list: Vec<(String, Molecule)> = fragments.into_iter().collect();
            let mut pool = Vec::new();
            for c in &complexes {
                pool.extend(complex_distances(c, &words, &frag_list, PairSource::Random)?);
            }
            let random_d = if pool.is_empty() {
                warn!("no word/fragment pair co-occurs in any complex; the random control is empty");
                Vec::new()
            } else {
                random_control(&pool, n_random, ctx.seed)?
            };
            let dist = |v: &[PairDistance]| v.iter().map(|p| p.distance).collect::<Vec<_>>();
            let summary = report(&dist(&rule_d), &dist(&random_d))?;

            let mut o = ctx.outputs();
            o.text(&out, |w| {
                writeln!(w, "complex_id\tword\tfragment_id\tdistance\tsource")?;
                for p in rule_d.iter().chain(&random_d) {
                    writeln!(
                        w,
                        "{}\t{}\t{}\t{}\t{}",
                        p.complex_id,
                        p.word_key,
                        p.fragment_id,
                        p.distance,
                        source_name(p.source)
                    )?;
                }
                Ok(())
            })?;
            o.json(&report_path, &summary)?;
            o.commit()?;
            let med = |v: Option<f64>| v.map_or("NA".to_string(), |x| format!("{x:.2}"));
            println!(
                "{} rule pairs (median {} A), {} random pairs (median {} A)",
                summary.n_rule,
                med(summary.median_rule),
                summary.n_random,
                med(summary.median_random)
            );
            Ok(())
        }
    }
}
