//! Building-block fragmentation and the fragment library.
//!
//! A molecule is cut at acyclic single bonds chosen by a [`CutRuleSet`]. The
//! pieces left after removing those bonds are *blocks*; fragments are
//! connected unions of up to `max_blocks` adjacent blocks, hydrogen-capped at
//! the severed bonds and identified by canonical SMILES.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::io::{BufRead, Write};
use std::path::Path;

use log::warn;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::chem::{canonical_key, contains_substructure, descriptors, parse_smiles, BondOrder, Molecule};
use crate::error::{Error, Result};
use crate::io::data_lines;

/// Upper bound on block unions examined for a single molecule.
pub const MAX_UNIONS: usize = 100_000;

/// Decides which bonds may be cut.
pub trait CutRuleSet: Sync {
    fn is_cuttable(&self, m: &Molecule, bond: usize, ring_bonds: &[bool]) -> bool;
}

/// Acyclic, non-aromatic single bonds between two non-terminal heavy atoms;
/// amide C–N bonds are kept intact unless `keep_amides` is off.
#[derive(Debug, Clone, Copy)]
pub struct DefaultCutRules {
    pub keep_amides: bool,
}

impl Default for DefaultCutRules {
    fn default() -> Self {
        DefaultCutRules { keep_amides: true }
    }
}

impl CutRuleSet for DefaultCutRules {
    fn is_cuttable(&self, m: &Molecule, bond: usize, ring_bonds: &[bool]) -> bool {
        let b = m.bond(bond);
        b.order == BondOrder::Single
            && !ring_bonds[bond]
            && m.degree(b.a) > 1
            && m.degree(b.b) > 1
            && !(self.keep_amides && m.is_amide_cn(bond))
    }
}

pub fn identify_cut_bonds(m: &Molecule, rules: &dyn CutRuleSet) -> BTreeSet<usize> {
    let ring = m.ring_bonds();
    (0..m.bonds().len())
        .filter(|&b| rules.is_cuttable(m, b, &ring))
        .collect()
}

/// Canonical keys of every fragment of `m`, sorted and de-duplicated.
pub fn enumerate_fragments(
    m: &Molecule,
    cuts: &BTreeSet<usize>,
    max_blocks: usize,
    max_heavy: usize,
) -> Result<Vec<String>> {
    let n = m.atom_count();
    if n == 0 || max_blocks == 0 {
        return Ok(Vec::new());
    }
    // Blocks = components once the cut bonds are removed.
    let mut block_of = vec![usize::MAX; n];
    let mut blocks: Vec<Vec<usize>> = Vec::new();
    for start in 0..n {
        if block_of[start] != usize::MAX {
            continue;
        }
        let id = blocks.len();
        let mut members = vec![start];
        block_of[start] = id;
        let mut i = 0;
        while i < members.len() {
            let v = members[i];
            i += 1;
            for &(w, b) in m.neighbors(v) {
                if !cuts.contains(&b) && block_of[w] == usize::MAX {
                    block_of[w] = id;
                    members.push(w);
                }
            }
        }
        members.sort_unstable();
        blocks.push(members);
    }
    let heavy: Vec<usize> = blocks
        .iter()
        .map(|b| b.iter().filter(|&&a| !m.atom(a).is_wildcard()).count())
        .collect();
    let mut block_adj: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); blocks.len()];
    for &b in cuts {
        let bond = m.bond(b);
        let (x, y) = (block_of[bond.a], block_of[bond.b]);
        if x != y {
            block_adj[x].insert(y);
            block_adj[y].insert(x);
        }
    }

    // Grow connected block sets level by level.
    let mut seen: HashSet<Vec<usize>> = HashSet::new();
    let mut level: Vec<Vec<usize>> = Vec::new();
    for (i, &h) in heavy.iter().enumerate() {
        if h <= max_heavy {
            level.push(vec![i]);
            seen.insert(vec![i]);
        }
    }
    let mut unions: Vec<Vec<usize>> = level.clone();
    for _ in 1..max_blocks {
        let mut next = Vec::new();
        for set in &level {
            let total: usize = set.iter().map(|&b| heavy[b]).sum();
            let frontier: BTreeSet<usize> = set
                .iter()
                .flat_map(|&b| block_adj[b].iter().copied())
                .filter(|b| !set.contains(b))
                .collect();
            for nb in frontier {
                if total + heavy[nb] > max_heavy {
                    continue;
                }
                let mut grown = set.clone();
                grown.push(nb);
                grown.sort_unstable();
                if seen.insert(grown.clone()) {
                    if seen.len() > MAX_UNIONS {
                        return Err(Error::CombinatorialLimit { limit: MAX_UNIONS });
                    }
                    next.push(grown);
                }
            }
        }
        if next.is_empty() {
            break;
        }
        unions.extend(next.iter().cloned());
        level = next;
    }

    let mut keys = BTreeSet::new();
    for set in unions {
        let mut atoms: Vec<usize> = set.iter().flat_map(|&b| blocks[b].iter().copied()).collect();
        atoms.sort_unstable();
        keys.insert(canonical_key(&capped_subgraph(m, &atoms, cuts)));
    }
    Ok(keys.into_iter().collect())
}

/// Induced subgraph with one hydrogen added per severed cut bond.
fn capped_subgraph(m: &Molecule, atoms: &[usize], cuts: &BTreeSet<usize>) -> Molecule {
    let (sub, origin) = m.induced_subgraph(atoms);
    let inside: HashSet<usize> = atoms.iter().copied().collect();
    let mut new_atoms = sub.atoms().to_vec();
    for (new, &old) in origin.iter().enumerate() {
        for &(w, b) in m.neighbors(old) {
            if cuts.contains(&b) && !inside.contains(&w) {
                new_atoms[new].hydrogens += m.bond(b).order.valence() as u8;
            }
        }
    }
    Molecule::new(new_atoms, sub.bonds().to_vec(), String::new()).expect("capping keeps the graph valid")
}

/// Removal rules for structurally uninformative fragments.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct RedundancyFilter {
    /// Fragments with fewer heavy atoms are dropped.
    pub min_heavy: usize,
    /// Acyclic fragments with `rotatable_bonds > max_rotatable_ratio * heavy_atoms`
    /// are dropped as flexible chains.
    pub max_rotatable_ratio: f64,
}

impl Default for RedundancyFilter {
    fn default() -> Self {
        RedundancyFilter {
            min_heavy: 3,
            max_rotatable_ratio: 1.0 / 3.0,
        }
    }
}

impl RedundancyFilter {
    pub fn disabled() -> Self {
        RedundancyFilter {
            min_heavy: 0,
            max_rotatable_ratio: f64::INFINITY,
        }
    }

    pub fn keeps(&self, m: &Molecule) -> bool {
        let heavy = m.heavy_atom_count();
        if heavy < self.min_heavy {
            return false;
        }
        let acyclic = !m.ring_bonds().iter().any(|&r| r);
        if acyclic {
            let rot = descriptors(m, None).rotatable_bonds as f64;
            if rot > self.max_rotatable_ratio * heavy as f64 {
                return false;
            }
        }
        true
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct LibraryConfig {
    pub min_freq: f64,
    pub max_blocks: usize,
    pub max_heavy: usize,
    pub redundancy: RedundancyFilter,
}

impl Default for LibraryConfig {
    fn default() -> Self {
        LibraryConfig {
            min_freq: 0.001,
            max_blocks: 3,
            max_heavy: 25,
            redundancy: RedundancyFilter::default(),
        }
    }
}

/// One library entry; the JSONL record is `{"fragment_id","smiles","count","freq"}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Fragment {
    pub fragment_id: String,
    pub smiles: String,
    pub count: usize,
    pub freq: f64,
    #[serde(skip)]
    pub heavy_atoms: usize,
}

#[derive(Debug, Clone)]
pub struct FragmentLibrary {
    fragments: Vec<Fragment>,
    molecules: Vec<Molecule>,
    index: BTreeMap<String, usize>,
    corpus_size: usize,
    config: LibraryConfig,
}

impl FragmentLibrary {
    fn from_parts(fragments: Vec<Fragment>, corpus_size: usize, config: LibraryConfig) -> Result<Self> {
        let mut molecules = Vec::with_capacity(fragments.len());
        let mut index = BTreeMap::new();
        let mut keys = HashSet::new();
        for (i, f) in fragments.iter().enumerate() {
            if index.insert(f.fragment_id.clone(), i).is_some() {
                return Err(Error::Value(format!("duplicate fragment id {}", f.fragment_id)));
            }
            if !keys.insert(f.smiles.clone()) {
                return Err(Error::Value(format!("duplicate fragment key {}", f.smiles)));
            }
            molecules.push(parse_smiles(&f.smiles)?);
        }
        let mut fragments = fragments;
        for (f, m) in fragments.iter_mut().zip(&molecules) {
            f.heavy_atoms = m.heavy_atom_count();
        }
        Ok(FragmentLibrary {
            fragments,
            molecules,
            index,
            corpus_size,
            config,
        })
    }

    /// Library over explicit `(id, smiles, count)` entries; mainly for tests
    /// and externally curated fragment sets.
    pub fn from_entries(entries: &[(&str, &str, usize)], corpus_size: usize) -> Result<Self> {
        let fragments = entries
            .iter()
            .map(|&(id, smiles, count)| {
                Ok(Fragment {
                    fragment_id: id.to_string(),
                    smiles: canonical_key(&parse_smiles(smiles)?),
                    count,
                    freq: if corpus_size == 0 {
                        0.0
                    } else {
                        count as f64 / corpus_size as f64
                    },
                    heavy_atoms: 0,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Self::from_parts(fragments, corpus_size, LibraryConfig::default())
    }

    pub fn len(&self) -> usize {
        self.fragments.len()
    }

    pub fn is_empty(&self) -> bool {
        self.fragments.is_empty()
    }

    pub fn fragments(&self) -> &[Fragment] {
        &self.fragments
    }

    pub fn molecule(&self, index: usize) -> &Molecule {
        &self.molecules[index]
    }

    pub fn index_of(&self, fragment_id: &str) -> Option<usize> {
        self.index.get(fragment_id).copied()
    }

    pub fn get(&self, fragment_id: &str) -> Option<&Fragment> {
        self.index_of(fragment_id).map(|i| &self.fragments[i])
    }

    pub fn corpus_size(&self) -> usize {
        self.corpus_size
    }

    pub fn config(&self) -> &LibraryConfig {
        &self.config
    }

    /// Indices of library fragments that are substructures of `m`.
    pub fn contained_in(&self, m: &Molecule) -> Vec<usize> {
        (0..self.molecules.len())
            .filter(|&i| contains_substructure(&self.molecules[i], m))
            .collect()
    }

    pub fn write_jsonl(&self, mut w: impl Write) -> Result<()> {
        let c = &self.config;
        writeln!(
            w,
            "# pwrules fragments corpus_size={} min_freq={} max_blocks={} max_heavy={} min_heavy={} max_rotatable_ratio={}",
            self.corpus_size, c.min_freq, c.max_blocks, c.max_heavy, c.redundancy.min_heavy, c.redundancy.max_rotatable_ratio
        )?;
        crate::io::write_jsonl(w, &self.fragments)
    }

    pub fn read_jsonl(path: &Path) -> Result<Self> {
        Self::parse_jsonl(crate::io::open(path)?, path)
    }

    pub fn parse_jsonl(reader: impl BufRead, path: &Path) -> Result<Self> {
        let mut header = None;
        let mut fragments: Vec<Fragment> = Vec::new();
        let mut lines = Vec::new();
        for line in reader.lines() {
            lines.push(line?);
        }
        for l in &lines {
            if let Some(h) = l.strip_prefix("# pwrules fragments ") {
                header = Some(h.to_string());
            }
        }
        for item in data_lines(lines.join("\n").as_bytes()) {
            let (n, line) = item?;
            fragments.push(serde_json::from_str(&line).map_err(|e| Error::parse(path, n, e.to_string()))?);
        }
        let mut config = LibraryConfig::default();
        let mut corpus_size = None;
        if let Some(h) = header {
            for kv in h.split_whitespace() {
                let Some((k, v)) = kv.split_once('=') else { continue };
                let bad = || Error::parse(path, 1, format!("bad header field {kv:?}"));
                match k {
                    "corpus_size" => corpus_size = Some(v.parse().map_err(|_| bad())?),
                    "min_freq" => config.min_freq = v.parse().map_err(|_| bad())?,
                    "max_blocks" => config.max_blocks = v.parse().map_err(|_| bad())?,
                    "max_heavy" => config.max_heavy = v.parse().map_err(|_| bad())?,
                    "min_heavy" => config.redundancy.min_heavy = v.parse().map_err(|_| bad())?,
                    "max_rotatable_ratio" => config.redundancy.max_rotatable_ratio = v.parse().map_err(|_| bad())?,
                    _ => {}
                }
            }
        }
        let corpus_size = corpus_size.unwrap_or_else(|| {
            fragments
                .iter()
                .find(|f| f.freq > 0.0)
                .map_or(0, |f| (f.count as f64 / f.freq).round() as usize)
        });
        Self::from_parts(fragments, corpus_size, config)
    }
}

/// Counts fragments over a corpus (once per molecule), applies the frequency
/// and redundancy filters and numbers survivors `frag_1..` by descending count.
pub fn build_library(corpus: &[Molecule], config: &LibraryConfig, rules: &dyn CutRuleSet) -> Result<FragmentLibrary> {
    if corpus.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let per_molecule: Vec<Vec<String>> = corpus
        .par_iter()
        .enumerate()
        .map(|(i, m)| {
            let cuts = identify_cut_bonds(m, rules);
            match enumerate_fragments(m, &cuts, config.max_blocks, config.max_heavy) {
                Ok(keys) => keys,
                Err(e) => {
                    warn!("molecule {i} ({}) skipped: {e}", m.source_text());
                    Vec::new()
                }
            }
        })
        .collect();
    let mut counts: BTreeMap<String, usize> = BTreeMap::new();
    for keys in per_molecule {
        for k in keys {
            *counts.entry(k).or_default() += 1;
        }
    }
    let n = corpus.len() as f64;
    let candidates: Vec<(String, usize)> = counts
        .into_iter()
        .filter(|&(_, c)| c as f64 / n >= config.min_freq)
        .collect();
    let kept: Vec<Option<(String, usize)>> = candidates
        .into_par_iter()
        .map(|(key, count)| {
            let m = parse_smiles(&key).expect("canonical keys re-parse");
            config.redundancy.keeps(&m).then_some((key, count))
        })
        .collect();
    let mut kept: Vec<(String, usize)> = kept.into_iter().flatten().collect();
    if kept.is_empty() {
        return Err(Error::EmptyLibrary);
    }
    kept.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    let fragments = kept
        .into_iter()
        .enumerate()
        .map(|(i, (smiles, count))| Fragment {
            fragment_id: format!("frag_{}", i + 1),
            smiles,
            count,
            freq: count as f64 / n,
            heavy_atoms: 0,
        })
        .collect();
    FragmentLibrary::from_parts(fragments, corpus.len(), config.clone())
}

/// Fraction of probe molecules containing at least one library fragment.
pub fn coverage(lib: &FragmentLibrary, probe: &[Molecule]) -> Result<f64> {
    if probe.is_empty() {
        return Err(Error::EmptyProbe);
    }
    if lib.is_empty() {
        return Err(Error::EmptyLibrary);
    }
    let hits = probe
        .par_iter()
        .filter(|m| lib.molecules.iter().any(|f| contains_substructure(f, m)))
        .count();
    Ok(hits as f64 / probe.len() as f64)
}
