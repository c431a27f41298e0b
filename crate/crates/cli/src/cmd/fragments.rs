use std::path::PathBuf;

use anyhow::Result;
use clap::Subcommand;
use log::warn;
use pwrules::chem::{parse_smiles, Molecule};
use pwrules::fragment::{build_library, coverage, DefaultCutRules, LibraryConfig};
use pwrules::io::read_molecules_tsv;
use serde::Serialize;

use super::{dry_run_done, load_library, Global};

#[derive(Subcommand)]
pub enum Cmd {
    /// Cut a molecule corpus into a frequency-filtered fragment library
    Build {
        /// id<TAB>smiles corpus
        #[arg(long)]
        molecules: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        min_freq: Option<f64>,
        #[arg(long)]
        max_blocks: Option<usize>,
        #[arg(long)]
        max_heavy: Option<usize>,
    },
    /// Fraction of probe molecules containing at least one library fragment
    Coverage {
        #[arg(long)]
        library: PathBuf,
        #[arg(long)]
        molecules: PathBuf,
        /// Also write the result as JSON
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

/// Parses every row; unparseable SMILES are skipped with a warning.
fn parse_corpus(rows: &[(String, String)]) -> Vec<Molecule> {
    rows.iter()
        .filter_map(|(id, s)| match parse_smiles(s) {
            Ok(m) => Some(m),
            Err(e) => {
                warn!("{id}: {e}; skipped");
                None
            }
        })
        .collect()
}

#[derive(Serialize)]
struct CoverageReport {
    coverage: f64,
    n_probe: usize,
    n_fragments: usize,
}

pub fn run(cmd: Cmd, g: &Global) -> Result<()> {
    match cmd {
        Cmd::Build {
            molecules,
            out,
            min_freq,
            max_blocks,
            max_heavy,
        } => {
            let mut ctx = g.ctx("fragments build")?;
            ctx.require([&molecules])?;
            let d = LibraryConfig::default();
            let config = LibraryConfig {
                min_freq: ctx.param("fragments.min_freq", min_freq, d.min_freq)?,
                max_blocks: ctx.param("fragments.max_blocks", max_blocks, d.max_blocks)?,
                max_heavy: ctx.param("fragments.max_heavy", max_heavy, d.max_heavy)?,
                redundancy: d.redundancy,
            };
            if !(0.0..=1.0).contains(&config.min_freq) || config.max_blocks == 0 || config.max_heavy == 0 {
                return Err(crate::ctx::usage(
                    "min_freq must lie in [0, 1]; max_blocks and max_heavy must be positive",
                ));
            }
            let rows = read_molecules_tsv(&molecules)?;
            let corpus = parse_corpus(&rows);
            if g.dry_run {
                return dry_run_done(&[&out]);
            }
            let lib = build_library(&corpus, &config, &DefaultCutRules::default())?;
            let mut o = ctx.outputs();
            o.text(&out, |w| Ok(lib.write_jsonl(w)?))?;
            o.commit()?;
            println!("{} fragments from {} molecules", lib.len(), corpus.len());
            Ok(())
        }
        Cmd::Coverage {
            library,
            molecules,
            out,
        } => {
            let ctx = g.ctx("fragments coverage")?;
            ctx.require([&library, &molecules])?;
            let lib = load_library(&library)?;
            let probe = parse_corpus(&read_molecules_tsv(&molecules)?);
            if g.dry_run {
                return dry_run_done(&out.iter().map(|p| p.as_path()).collect::<Vec<_>>());
            }
            let c = coverage(&lib, &probe)?;
            println!("coverage = {c:?}");
            if let Some(out) = out {
                let mut o = ctx.outputs();
                o.json(
                    &out,
                    &CoverageReport {
                        coverage: c,
                        n_probe: probe.len(),
                        n_fragments: lib.len(),
                    },
                )?;
                o.commit()?;
            }
            Ok(())
        }
    }
}
