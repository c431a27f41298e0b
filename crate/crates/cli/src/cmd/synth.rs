use std::fs;
use std::path::PathBuf;

use anyhow::{Context, Result};
use clap::Args as ClapArgs;
use pwrules::io::write_jsonl;
use pwrules::synth::{generate, SynthConfig, SynthProtein};
use pwrules::words::{write_attention, write_embeddings};
use serde::Serialize;

use super::{dry_run_done, Global};
use crate::ctx::usage;

/// Write a small synthetic dataset with one planted (word, fragment) rule
#[derive(ClapArgs)]
pub struct Args {
    /// Created if absent
    #[arg(long)]
    out_dir: PathBuf,
    #[arg(long)]
    n_proteins: Option<usize>,
    #[arg(long)]
    n_ligands: Option<usize>,
}

#[derive(Serialize)]
struct Planted<'a> {
    word: &'a str,
    fragment: &'a str,
    query_protein: &'a str,
}

pub fn run(a: Args, g: &Global) -> Result<()> {
    let mut ctx = g.ctx("synth")?;
    let d = SynthConfig::default();
    let config = SynthConfig {
        n_proteins: ctx.param("synth.n_proteins", a.n_proteins, d.n_proteins)?,
        n_planted: ctx.param("synth.n_planted", None, d.n_planted)?,
        n_ligands: ctx.param("synth.n_ligands", a.n_ligands, d.n_ligands)?,
        n_planted_ligands: ctx.param("synth.n_planted_ligands", None, d.n_planted_ligands)?,
        words_per_protein: ctx.param("synth.words_per_protein", None, d.words_per_protein)?,
        background_words: ctx.param("synth.background_words", None, d.background_words)?,
        embed_dim: ctx.param("synth.embed_dim", None, d.embed_dim)?,
        screen_actives: ctx.param("synth.screen_actives", None, d.screen_actives)?,
        decoys_per_active: ctx.param("synth.decoys_per_active", None, d.decoys_per_active)?,
        seed: ctx.seed,
    };
    let data = generate(&config).map_err(|e| usage(format!("[synth]: {e}")))?;

    let dir = &a.out_dir;
    let path = |name: &str| dir.join(name);
    let all: Vec<&SynthProtein> = data.proteins.iter().chain(std::iter::once(&data.query)).collect();
    if g.dry_run {
        return dry_run_done(&[dir.as_path()]);
    }
    for sub in ["attention", "embeddings"] {
        fs::create_dir_all(dir.join(sub)).with_context(|| format!("creating {}", dir.join(sub).display()))?;
    }

    let mut o = ctx.outputs();
    let records: Vec<_> = data.proteins.iter().map(|p| p.record.clone()).collect();
    o.text(&path("proteins.jsonl"), |w| Ok(write_jsonl(w, &records)?))?;
    o.text(&path("query.jsonl"), |w| {
        Ok(write_jsonl(w, std::slice::from_ref(&data.query.record))?)
    })?;
    o.text(&path("affinity.jsonl"), |w| Ok(write_jsonl(w, &data.affinities)?))?;
    o.text(&path("ligands.tsv"), |w| {
        for (id, s) in &data.ligands {
            writeln!(w, "{id}\t{s}")?;
        }
        Ok(())
    })?;
    o.text(&path("screening.tsv"), |w| {
        for (id, s) in &data.screening_library {
            writeln!(w, "{id}\t{s}")?;
        }
        Ok(())
    })?;
    o.text(&path("actives.txt"), |w| {
        for id in &data.screening_actives {
            writeln!(w, "{id}")?;
        }
        Ok(())
    })?;
    o.json(
        &path("planted.json"),
        &Planted {
            word: &data.planted_word,
            fragment: &data.planted_fragment,
            query_protein: &data.query.record.protein_id,
        },
    )?;
    for p in &all {
        let id = &p.record.protein_id;
        o.binary(&dir.join("attention").join(format!("{id}.pwat")), |w| {
            Ok(write_attention(w, &p.attention)?)
        })?;
        o.binary(&dir.join("embeddings").join(format!("{id}.pweb")), |w| {
            Ok(write_embeddings(w, &p.residue_embeddings)?)
        })?;
    }
    o.commit()?;
    println!(
        "{} proteins, {} affinity records, {} screening molecules ({} active) in {}",
        data.proteins.len(),
        data.affinities.len(),
        data.screening_library.len(),
        data.screening_actives.len(),
        dir.display()
    );
    Ok(())
}
