use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use clap::Subcommand;
use pwrules::dataset::ProteinRecord;
use pwrules::io::{open, read_jsonl, write_jsonl};
use pwrules::matrix::Matrix;
use pwrules::pipeline::embed_words;
use pwrules::words::{
    build_dictionary, read_attention, read_embeddings, segment_all, write_embeddings, EdgeThreshold, SegmentConfig,
    SegmentInput,
};

use super::{dry_run_done, load_words_with_embeddings, Global};
use crate::ctx::usage;

#[derive(Subcommand)]
pub enum Cmd {
    /// Segment proteins into words and mean-pool their residue embeddings
    Segment {
        /// proteins.jsonl: {"protein_id","sequence"}
        #[arg(long)]
        proteins: PathBuf,
        /// Directory holding <protein_id>.pwat attention matrices
        #[arg(long)]
        attention_dir: PathBuf,
        /// Directory holding <protein_id>.pweb residue embeddings
        #[arg(long)]
        embeddings_dir: PathBuf,
        /// words.jsonl
        #[arg(long)]
        out: PathBuf,
        /// Word embeddings (PWEB), one row per line of --out
        #[arg(long)]
        out_embeddings: PathBuf,
        /// Edge threshold as a percentile of each protein's attention weights
        #[arg(long)]
        percentile: Option<f64>,
        #[arg(long)]
        min_len: Option<usize>,
        #[arg(long)]
        max_len: Option<usize>,
    },
    /// Count word keys across proteins and drop rare ones
    Dict {
        #[arg(long)]
        words: PathBuf,
        #[arg(long)]
        embeddings: PathBuf,
        #[arg(long)]
        min_count: Option<usize>,
        /// Dictionary TSV
        #[arg(long)]
        out: PathBuf,
        /// Words whose key is in the dictionary
        #[arg(long)]
        filtered_words: PathBuf,
        #[arg(long)]
        filtered_embeddings: PathBuf,
    },
}

fn per_protein(dir: &Path, id: &str, ext: &str) -> PathBuf {
    dir.join(format!("{id}.{ext}"))
}

pub fn run(cmd: Cmd, g: &Global) -> Result<()> {
    match cmd {
        Cmd::Segment {
            proteins,
            attention_dir,
            embeddings_dir,
            out,
            out_embeddings,
            percentile,
            min_len,
            max_len,
        } => {
            let mut ctx = g.ctx("words segment")?;
            ctx.require([&proteins, &attention_dir, &embeddings_dir])?;
            let d = SegmentConfig::default();
            let EdgeThreshold::Percentile(default_pct) = d.threshold else {
                unreachable!()
            };
            let config = SegmentConfig {
                threshold: EdgeThreshold::Percentile(ctx.param("words.percentile", percentile, default_pct)?),
                min_len: ctx.param("words.min_len", min_len, d.min_len)?,
                max_len: ctx.param("words.max_len", max_len, d.max_len)?,
            };
            if config.min_len == 0 || config.min_len > config.max_len {
                return Err(usage("words: need 1 <= min_len <= max_len"));
            }
            let records: Vec<ProteinRecord> = read_jsonl(&proteins)?;
            let mut paths = Vec::new();
            for r in &records {
                paths.push(per_protein(&attention_dir, &r.protein_id, "pwat"));
                paths.push(per_protein(&embeddings_dir, &r.protein_id, "pweb"));
            }
            ctx.require(&paths)?;
            let mut attention = Vec::with_capacity(records.len());
            let mut residues = std::collections::HashMap::new();
            for r in &records {
                let p = per_protein(&attention_dir, &r.protein_id, "pwat");
                attention.push(read_attention(open(&p)?).with_context(|| p.display().to_string())?);
                let p = per_protein(&embeddings_dir, &r.protein_id, "pweb");
                let e: Matrix = read_embeddings(open(&p)?).with_context(|| p.display().to_string())?;
                residues.insert(r.protein_id.clone(), e);
            }
            if g.dry_run {
                return dry_run_done(&[&out, &out_embeddings]);
            }
            let inputs: Vec<SegmentInput<'_>> = records
                .iter()
                .zip(&attention)
                .map(|(r, a)| SegmentInput {
                    protein_id: &r.protein_id,
                    sequence: &r.sequence,
                    attention: a,
                })
                .collect();
            let mut words = Vec::new();
            for (r, res) in records.iter().zip(segment_all(&inputs, ctx.seed, &config)) {
                words.extend(res.with_context(|| format!("segmenting {}", r.protein_id))?);
            }
            let emb = embed_words(&words, &residues)?;
            let mut o = ctx.outputs();
            o.text(&out, |w| Ok(write_jsonl(w, &words)?))?;
            o.binary(&out_embeddings, |w| Ok(write_embeddings(w, &emb)?))?;
            o.commit()?;
            println!("{} words from {} proteins", words.len(), records.len());
            Ok(())
        }
        Cmd::Dict {
            words,
            embeddings,
            min_count,
            out,
            filtered_words,
            filtered_embeddings,
        } => {
            let mut ctx = g.ctx("words dict")?;
            ctx.require([&words, &embeddings])?;
            let min_count = ctx.param("words.min_count", min_count, 2)?;
            let (w, e) = load_words_with_embeddings(&words, &embeddings)?;
            if g.dry_run {
                return dry_run_done(&[&out, &filtered_words, &filtered_embeddings]);
            }
            let dict = build_dictionary(&w, min_count);
            let keep: Vec<usize> = (0..w.len())
                .filter(|&i| min_count <= 1 || dict.contains(&w[i].key))
                .collect();
            let kept_words: Vec<_> = keep.iter().map(|&i| w[i].clone()).collect();
            let kept_emb = e.select_rows(&keep);
            let mut o = ctx.outputs();
            o.text(&out, |wr| Ok(dict.write_tsv(wr)?))?;
            o.text(&filtered_words, |wr| Ok(write_jsonl(wr, &kept_words)?))?;
            o.binary(&filtered_embeddings, |wr| Ok(write_embeddings(wr, &kept_emb)?))?;
            o.commit()?;
            println!(
                "{} dictionary keys; kept {} of {} words",
                dict.len(),
                kept_words.len(),
                w.len()
            );
            Ok(())
        }
    }
}
