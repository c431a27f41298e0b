//! Protein words: residue communities found by Louvain clustering of an
//! attention graph, keyed by their residue letters.

use std::collections::BTreeMap;
use std::io::{BufRead, Read, Write};
use std::path::Path;

use log::debug;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io::{data_lines, expect_magic, read_f32, read_u32};
use crate::matrix::Matrix;

/// Longest sequence accepted anywhere in the pipeline.
pub const MAX_SEQUENCE_LEN: usize = 1024;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProteinWord {
    pub protein_id: String,
    pub key: String,
    pub positions: Vec<usize>,
}

impl ProteinWord {
    pub fn new(protein_id: &str, sequence: &str, mut positions: Vec<usize>) -> Result<Self> {
        positions.sort_unstable();
        positions.dedup();
        let letters: Vec<char> = sequence.chars().collect();
        let key = positions
            .iter()
            .map(|&p| {
                letters
                    .get(p)
                    .copied()
                    .ok_or_else(|| Error::Index(format!("position {p} outside sequence of length {}", letters.len())))
            })
            .collect::<Result<String>>()?;
        Ok(ProteinWord {
            protein_id: protein_id.to_string(),
            key,
            positions,
        })
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }
}

/// Undirected weighted graph over residues; edges are stored with `i < j`.
#[derive(Debug, Clone, PartialEq)]
pub struct AttentionGraph {
    n: usize,
    edges: Vec<(usize, usize, f64)>,
}

impl AttentionGraph {
    pub fn new(n: usize, edges: Vec<(usize, usize, f64)>) -> Result<Self> {
        let mut norm = Vec::with_capacity(edges.len());
        for (i, j, w) in edges {
            if i == j || i >= n || j >= n {
                return Err(Error::Index(format!("bad edge ({i}, {j}) for {n} nodes")));
            }
            if !w.is_finite() || w < 0.0 {
                return Err(Error::Value(format!("edge ({i}, {j}) has weight {w}")));
            }
            norm.push((i.min(j), i.max(j), w));
        }
        norm.sort_by_key(|e| (e.0, e.1));
        if norm.windows(2).any(|w| (w[0].0, w[0].1) == (w[1].0, w[1].1)) {
            return Err(Error::Value("duplicate edge".into()));
        }
        Ok(AttentionGraph { n, edges: norm })
    }

    pub fn node_count(&self) -> usize {
        self.n
    }

    pub fn edges(&self) -> &[(usize, usize, f64)] {
        &self.edges
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum EdgeThreshold {
    /// Percentile (0–100, linear interpolation) of the symmetrized
    /// off-diagonal weights of each protein.
    Percentile(f64),
    Absolute(f64),
}

impl Default for EdgeThreshold {
    fn default() -> Self {
        EdgeThreshold::Percentile(90.0)
    }
}

/// Linear-interpolation percentile of unsorted values.
pub fn percentile(values: &[f64], p: f64) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let rank = (p.clamp(0.0, 100.0) / 100.0) * (v.len() - 1) as f64;
    let lo = rank.floor() as usize;
    let hi = rank.ceil() as usize;
    v[lo] + (v[hi] - v[lo]) * (rank - lo as f64)
}

/// Symmetrizes `attn` and keeps positive weights at or above the threshold.
pub fn build_attention_graph(attn: &Matrix, threshold: EdgeThreshold) -> Result<AttentionGraph> {
    if !attn.is_square() {
        return Err(Error::Shape(format!(
            "attention matrix is {}x{}",
            attn.rows(),
            attn.cols()
        )));
    }
    if let Some(bad) = attn.as_slice().iter().find(|v| !v.is_finite() || **v < 0.0) {
        return Err(Error::Value(format!("attention entry {bad} is negative or not finite")));
    }
    let n = attn.rows();
    let mut sym = Vec::with_capacity(n * n.saturating_sub(1) / 2);
    for i in 0..n {
        for j in i + 1..n {
            sym.push((i, j, (attn[(i, j)] + attn[(j, i)]) / 2.0));
        }
    }
    let cut = match threshold {
        EdgeThreshold::Absolute(t) => t,
        EdgeThreshold::Percentile(p) => percentile(&sym.iter().map(|e| e.2).collect::<Vec<_>>(), p),
    };
    let edges = sym.into_iter().filter(|&(_, _, w)| w > 0.0 && w >= cut).collect();
    Ok(AttentionGraph { n, edges })
}

/// Working graph for Louvain levels: symmetric adjacency without self
/// loops, plus a separate self-loop weight per node.
struct LevelGraph {
    adj: Vec<Vec<(usize, f64)>>,
    self_loop: Vec<f64>,
    degree: Vec<f64>,
    m2: f64,
}

impl LevelGraph {
    fn from_attention(g: &AttentionGraph) -> Self {
        let mut adj = vec![Vec::new(); g.n];
        for &(i, j, w) in &g.edges {
            if w > 0.0 {
                adj[i].push((j, w));
                adj[j].push((i, w));
            }
        }
        Self::finish(adj, vec![0.0; g.n])
    }

    fn finish(adj: Vec<Vec<(usize, f64)>>, self_loop: Vec<f64>) -> Self {
        let degree: Vec<f64> = adj
            .iter()
            .zip(&self_loop)
            .map(|(a, s)| s + a.iter().map(|e| e.1).sum::<f64>())
            .collect();
        let m2 = degree.iter().sum();
        LevelGraph {
            adj,
            self_loop,
            degree,
            m2,
        }
    }

    fn len(&self) -> usize {
        self.adj.len()
    }

    /// Local moving phase. Returns contiguous community labels and whether
    /// any node changed community.
    fn local_moves(&self, rng: &mut ChaCha8Rng) -> (Vec<usize>, bool) {
        const EPS: f64 = 1e-12;
        let n = self.len();
        let mut comm: Vec<usize> = (0..n).collect();
        let mut tot = self.degree.clone();
        let mut order: Vec<usize> = (0..n).collect();
        order.shuffle(rng);
        let mut weight_to = vec![0.0; n];
        let mut touched: Vec<usize> = Vec::new();
        let mut any_move = false;
        loop {
            let mut moved = false;
            for &i in &order {
                let ki = self.degree[i];
                let own = comm[i];
                for &(j, w) in &self.adj[i] {
                    let c = comm[j];
                    if weight_to[c] == 0.0 {
                        touched.push(c);
                    }
                    weight_to[c] += w;
                }
                tot[own] -= ki;
                let gain = |c: usize, wt: f64| wt - tot[c] * ki / self.m2;
                let mut best = own;
                let mut best_gain = gain(own, weight_to[own]);
                touched.sort_unstable();
                for &c in &touched {
                    let g = gain(c, weight_to[c]);
                    if g > best_gain + EPS {
                        best = c;
                        best_gain = g;
                    }
                }
                tot[best] += ki;
                comm[i] = best;
                if best != own {
                    moved = true;
                }
                for &c in &touched {
                    weight_to[c] = 0.0;
                }
                touched.clear();
            }
            if !moved {
                break;
            }
            any_move = true;
        }
        (relabel(&comm), any_move)
    }

    fn aggregate(&self, labels: &[usize]) -> LevelGraph {
        let k = labels.iter().max().map_or(0, |m| m + 1);
        let mut self_loop = vec![0.0; k];
        let mut links: Vec<BTreeMap<usize, f64>> = vec![BTreeMap::new(); k];
        for i in 0..self.len() {
            let ci = labels[i];
            self_loop[ci] += self.self_loop[i];
            for &(j, w) in &self.adj[i] {
                let cj = labels[j];
                if ci == cj {
                    self_loop[ci] += w;
                } else {
                    *links[ci].entry(cj).or_default() += w;
                }
            }
        }
        let adj = links.into_iter().map(|m| m.into_iter().collect()).collect();
        Self::finish(adj, self_loop)
    }
}

/// Renumbers labels in order of first appearance.
fn relabel(labels: &[usize]) -> Vec<usize> {
    let mut map = BTreeMap::new();
    labels
        .iter()
        .map(|&l| {
            let next = map.len();
            *map.entry(l).or_insert(next)
        })
        .collect()
}

/// Louvain community detection (resolution 1). Returns a community label per
/// node, numbered in order of first appearance.
pub fn louvain(g: &AttentionGraph, seed: u64) -> Vec<usize> {
    let mut level = LevelGraph::from_attention(g);
    let mut labels: Vec<usize> = (0..g.n).collect();
    if level.m2 <= 0.0 {
        return labels;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    loop {
        let (level_labels, moved) = level.local_moves(&mut rng);
        if !moved {
            break;
        }
        for l in labels.iter_mut() {
            *l = level_labels[*l];
        }
        level = level.aggregate(&level_labels);
    }
    relabel(&labels)
}

/// Newman modularity of a labelled partition.
pub fn modularity(g: &AttentionGraph, labels: &[usize]) -> f64 {
    let mut degree = vec![0.0; g.n];
    for &(i, j, w) in &g.edges {
        degree[i] += w;
        degree[j] += w;
    }
    let m2: f64 = degree.iter().sum();
    if m2 <= 0.0 {
        return 0.0;
    }
    let k = labels.iter().max().map_or(0, |m| m + 1);
    let mut inside = vec![0.0; k];
    let mut tot = vec![0.0; k];
    for &(i, j, w) in &g.edges {
        if labels[i] == labels[j] {
            inside[labels[i]] += 2.0 * w;
        }
    }
    for (i, d) in degree.iter().enumerate() {
        tot[labels[i]] += d;
    }
    inside.iter().zip(&tot).map(|(a, t)| a / m2 - (t / m2).powi(2)).sum()
}

/// Groups node indices by label; groups are ordered by their smallest member.
pub fn communities(labels: &[usize]) -> Vec<Vec<usize>> {
    let mut groups: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for (i, &l) in labels.iter().enumerate() {
        groups.entry(l).or_default().push(i);
    }
    let mut out: Vec<Vec<usize>> = groups.into_values().collect();
    out.sort_by_key(|g| g[0]);
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SegmentConfig {
    pub threshold: EdgeThreshold,
    pub min_len: usize,
    pub max_len: usize,
}

impl Default for SegmentConfig {
    fn default() -> Self {
        SegmentConfig {
            threshold: EdgeThreshold::default(),
            min_len: 5,
            max_len: 20,
        }
    }
}

/// Words of one protein, ordered by first residue.
pub fn segment(
    protein_id: &str,
    sequence: &str,
    attn: &Matrix,
    seed: u64,
    config: &SegmentConfig,
) -> Result<Vec<ProteinWord>> {
    let len = sequence.chars().count();
    if len > MAX_SEQUENCE_LEN {
        return Err(Error::Length {
            len,
            max: MAX_SEQUENCE_LEN,
        });
    }
    if attn.rows() != len || attn.cols() != len {
        return Err(Error::Shape(format!(
            "{protein_id}: sequence length {len} but attention is {}x{}",
            attn.rows(),
            attn.cols()
        )));
    }
    let graph = build_attention_graph(attn, config.threshold)?;
    let labels = louvain(&graph, seed);
    communities(&labels)
        .into_iter()
        .filter(|c| (config.min_len..=config.max_len).contains(&c.len()))
        .map(|c| ProteinWord::new(protein_id, sequence, c))
        .collect()
}

pub struct SegmentInput<'a> {
    pub protein_id: &'a str,
    pub sequence: &'a str,
    pub attention: &'a Matrix,
}

/// [`segment`] over many proteins in parallel; results keep input order.
pub fn segment_all(inputs: &[SegmentInput<'_>], seed: u64, config: &SegmentConfig) -> Vec<Result<Vec<ProteinWord>>> {
    inputs
        .par_iter()
        .map(|x| segment(x.protein_id, x.sequence, x.attention, seed, config))
        .collect()
}

/// Mean of the residue embedding rows at the word's positions.
pub fn word_embedding(word: &ProteinWord, residue_embeddings: &Matrix) -> Result<Vec<f64>> {
    if word.positions.is_empty() {
        return Err(Error::Index(format!("word {:?} has no positions", word.key)));
    }
    let mut acc = vec![0.0; residue_embeddings.cols()];
    for &p in &word.positions {
        if p >= residue_embeddings.rows() {
            return Err(Error::Index(format!(
                "position {p} outside embedding matrix with {} rows",
                residue_embeddings.rows()
            )));
        }
        for (a, v) in acc.iter_mut().zip(residue_embeddings.row(p)) {
            *a += v;
        }
    }
    let n = word.positions.len() as f64;
    acc.iter_mut().for_each(|a| *a /= n);
    Ok(acc)
}

/// Number of distinct proteins producing each word key.
#[derive(Debug, Clone, PartialEq)]
pub struct WordDictionary {
    counts: BTreeMap<String, usize>,
    min_count: usize,
}

impl WordDictionary {
    pub fn count(&self, key: &str) -> usize {
        self.counts.get(key).copied().unwrap_or(0)
    }

    pub fn min_count(&self) -> usize {
        self.min_count
    }

    pub fn contains(&self, key: &str) -> bool {
        self.count(key) >= self.min_count
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, usize)> {
        self.counts.iter().map(|(k, &c)| (k.as_str(), c))
    }

    pub fn len(&self) -> usize {
        self.counts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }

    /// `key<TAB>count` lines after a `# pwrules dictionary min_count=N` header.
    pub fn write_tsv(&self, mut w: impl Write) -> Result<()> {
        writeln!(w, "# pwrules dictionary min_count={}", self.min_count)?;
        for (k, c) in &self.counts {
            writeln!(w, "{k}\t{c}")?;
        }
        Ok(())
    }

    pub fn read_tsv(reader: impl BufRead, path: &Path) -> Result<Self> {
        let mut lines = Vec::new();
        for l in reader.lines() {
            lines.push(l?);
        }
        let mut min_count = 2;
        for l in &lines {
            if let Some(v) = l.strip_prefix("# pwrules dictionary min_count=") {
                min_count = v.trim().parse().map_err(|_| Error::parse(path, 1, "bad min_count"))?;
            }
        }
        let mut counts = BTreeMap::new();
        for item in data_lines(lines.join("\n").as_bytes()) {
            let (n, line) = item?;
            let (k, c) = line
                .split_once('\t')
                .ok_or_else(|| Error::parse(path, n, "expected key<TAB>count"))?;
            let c = c.trim().parse().map_err(|_| Error::parse(path, n, "bad count"))?;
            counts.insert(k.to_string(), c);
        }
        Ok(WordDictionary { counts, min_count })
    }
}

/// Keys outside the 5–20 residue bound are not stored.
pub fn build_dictionary<'a>(words: impl IntoIterator<Item = &'a ProteinWord>, min_count: usize) -> WordDictionary {
    let mut seen: BTreeMap<&str, Vec<&str>> = BTreeMap::new();
    for w in words {
        if !(5..=20).contains(&w.key.chars().count()) {
            debug!("dictionary skips out-of-bound word {:?}", w.key);
            continue;
        }
        seen.entry(w.key.as_str()).or_default().push(w.protein_id.as_str());
    }
    let counts = seen
        .into_iter()
        .map(|(k, mut proteins)| {
            proteins.sort_unstable();
            proteins.dedup();
            (k.to_string(), proteins.len())
        })
        .collect();
    WordDictionary {
        counts,
        min_count: min_count.max(1),
    }
}

/// Words whose key reaches the dictionary's `min_count`. With `min_count` 1
/// every word passes, including keys the dictionary did not store.
pub fn filter_words(words: &[ProteinWord], dict: &WordDictionary) -> Vec<ProteinWord> {
    words
        .iter()
        .filter(|w| dict.min_count <= 1 || dict.contains(&w.key))
        .cloned()
        .collect()
}

const PWAT_MAGIC: &[u8; 4] = b"PWAT";
const PWEB_MAGIC: &[u8; 4] = b"PWEB";
const FORMAT_VERSION: u32 = 1;

fn check_version(r: &mut impl Read, kind: &'static str) -> Result<()> {
    let v = read_u32(r)?;
    if v != FORMAT_VERSION {
        return Err(Error::Format {
            kind,
            msg: format!("unsupported version {v}"),
        });
    }
    Ok(())
}

fn read_f32_block(r: &mut impl Read, count: usize, kind: &'static str) -> Result<Vec<f64>> {
    let mut data = Vec::with_capacity(count);
    for _ in 0..count {
        data.push(f64::from(read_f32(r).map_err(|_| Error::Format {
            kind,
            msg: "file is truncated".into(),
        })?));
    }
    let mut extra = [0u8; 1];
    if r.read(&mut extra)? != 0 {
        return Err(Error::Format {
            kind,
            msg: "trailing bytes after payload".into(),
        });
    }
    Ok(data)
}

fn write_f32_block(w: &mut impl Write, m: &Matrix) -> Result<()> {
    for &v in m.as_slice() {
        w.write_all(&(v as f32).to_le_bytes())?;
    }
    Ok(())
}

/// Reads a PWAT attention matrix (L×L, f32 little-endian).
pub fn read_attention(mut r: impl Read) -> Result<Matrix> {
    expect_magic(&mut r, PWAT_MAGIC, "PWAT")?;
    check_version(&mut r, "PWAT")?;
    let l = read_u32(&mut r)? as usize;
    if l > MAX_SEQUENCE_LEN * 16 {
        return Err(Error::Format {
            kind: "PWAT",
            msg: format!("implausible size {l}"),
        });
    }
    Matrix::from_vec(l, l, read_f32_block(&mut r, l * l, "PWAT")?)
}

pub fn write_attention(mut w: impl Write, attn: &Matrix) -> Result<()> {
    if !attn.is_square() {
        return Err(Error::Shape(format!(
            "attention matrix is {}x{}",
            attn.rows(),
            attn.cols()
        )));
    }
    w.write_all(PWAT_MAGIC)?;
    w.write_all(&FORMAT_VERSION.to_le_bytes())?;
    w.write_all(&(attn.rows() as u32).to_le_bytes())?;
    write_f32_block(&mut w, attn)
}

/// Reads a PWEB embedding matrix (rows×dim, f32 little-endian).
pub fn read_embeddings(mut r: impl Read) -> Result<Matrix> {
    expect_magic(&mut r, PWEB_MAGIC, "PWEB")?;
    check_version(&mut r, "PWEB")?;
    let rows = read_u32(&mut r)? as usize;
    let dim = read_u32(&mut r)? as usize;
    if rows.saturating_mul(dim) > 1 << 30 {
        return Err(Error::Format {
            kind: "PWEB",
            msg: format!("implausible size {rows}x{dim}"),
        });
    }
    Matrix::from_vec(rows, dim, read_f32_block(&mut r, rows * dim, "PWEB")?)
}

pub fn write_embeddings(mut w: impl Write, m: &Matrix) -> Result<()> {
    w.write_all(PWEB_MAGIC)?;
    w.write_all(&FORMAT_VERSION.to_le_bytes())?;
    w.write_all(&(m.rows() as u32).to_le_bytes())?;
    w.write_all(&(m.cols() as u32).to_le_bytes())?;
    write_f32_block(&mut w, m)
}
