//! Affinity records, deduplication, privileged-fragment labels and splits.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::io::{BufRead, Write};
use std::path::Path;

use log::{info, warn};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::chem::{canonical_key, parse_smiles};
use crate::error::{Error, Result};
use crate::fragment::FragmentLibrary;
use crate::io::data_lines;
use crate::words::MAX_SEQUENCE_LEN;

/// Activity cutoff in nM; strictly smaller values are active.
pub const ACTIVE_BELOW_NM: f64 = 10_000.0;

/// Declared in priority order (first = preferred).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum AffinityType {
    Kd,
    Ki,
    IC50,
    EC50,
}

/// Declared in priority order (first = preferred).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Source {
    Pdbbind,
    Bindingdb,
    Bindingnet,
    ChemblBinding,
    ChemblFunctional,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AffinityRecord {
    pub protein_id: String,
    pub smiles: String,
    #[serde(rename = "type")]
    pub affinity_type: AffinityType,
    pub value_nm: f64,
    pub source: Source,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProteinRecord {
    pub protein_id: String,
    pub sequence: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Rejected {
    /// 0-based position in the input stream.
    pub index: usize,
    pub protein_id: String,
    pub smiles: String,
    pub reason: String,
}

#[derive(Debug, Clone, Default)]
pub struct IngestReport {
    pub records: Vec<AffinityRecord>,
    pub rejected: Vec<Rejected>,
    /// Records dropped because their protein is longer than 1024 residues.
    pub dropped_long: usize,
}

/// Validates records, drops over-long proteins and canonicalizes SMILES.
/// Unparseable SMILES and non-positive values go to `rejected`.
pub fn ingest(
    records: impl IntoIterator<Item = AffinityRecord>,
    proteins: &HashMap<String, String>,
) -> Result<IngestReport> {
    let mut report = IngestReport::default();
    let mut canon_cache: HashMap<String, std::result::Result<String, String>> = HashMap::new();
    for (index, mut r) in records.into_iter().enumerate() {
        let seq = proteins
            .get(&r.protein_id)
            .ok_or_else(|| Error::UnknownProtein(r.protein_id.clone()))?;
        if seq.chars().count() > MAX_SEQUENCE_LEN {
            report.dropped_long += 1;
            continue;
        }
        let reject = |reason: String, r: &AffinityRecord| Rejected {
            index,
            protein_id: r.protein_id.clone(),
            smiles: r.smiles.clone(),
            reason,
        };
        if !(r.value_nm.is_finite() && r.value_nm > 0.0) {
            report
                .rejected
                .push(reject(format!("affinity value {} is not positive", r.value_nm), &r));
            continue;
        }
        let canon = canon_cache
            .entry(r.smiles.clone())
            .or_insert_with(|| {
                parse_smiles(&r.smiles)
                    .map(|m| canonical_key(&m))
                    .map_err(|e| e.to_string())
            })
            .clone();
        match canon {
            Ok(c) => {
                r.smiles = c;
                report.records.push(r);
            }
            Err(e) => report.rejected.push(reject(e, &r)),
        }
    }
    if report.dropped_long > 0 {
        info!(
            "dropped {} records for proteins over {MAX_SEQUENCE_LEN} residues",
            report.dropped_long
        );
    }
    if !report.rejected.is_empty() {
        warn!("rejected {} records", report.rejected.len());
    }
    Ok(report)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum DedupPolicy {
    /// Source priority first, then affinity type.
    #[default]
    SourceFirst,
    TypeFirst,
}

fn median(values: &mut [f64]) -> f64 {
    values.sort_by(f64::total_cmp);
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        (values[n / 2 - 1] + values[n / 2]) / 2.0
    }
}

/// Collapses the records of one (protein, ligand) pair.
///
/// # Panics
/// If `records` is empty.
pub fn dedup(records: &[AffinityRecord], policy: DedupPolicy) -> AffinityRecord {
    assert!(!records.is_empty(), "dedup needs at least one record");
    let best_source = |rs: &[&AffinityRecord]| rs.iter().map(|r| r.source).min().unwrap();
    let best_type = |rs: &[&AffinityRecord]| rs.iter().map(|r| r.affinity_type).min().unwrap();
    let mut pool: Vec<&AffinityRecord> = records.iter().collect();
    match policy {
        DedupPolicy::SourceFirst => {
            let s = best_source(&pool);
            pool.retain(|r| r.source == s);
            let t = best_type(&pool);
            pool.retain(|r| r.affinity_type == t);
        }
        DedupPolicy::TypeFirst => {
            let t = best_type(&pool);
            pool.retain(|r| r.affinity_type == t);
            let s = best_source(&pool);
            pool.retain(|r| r.source == s);
        }
    }
    let mut values: Vec<f64> = pool.iter().map(|r| r.value_nm).collect();
    AffinityRecord {
        protein_id: pool[0].protein_id.clone(),
        smiles: pool[0].smiles.clone(),
        affinity_type: pool[0].affinity_type,
        value_nm: median(&mut values),
        source: pool[0].source,
    }
}

/// One record per (protein, canonical ligand), sorted by that key.
pub fn dedup_all(records: &[AffinityRecord], policy: DedupPolicy) -> Vec<AffinityRecord> {
    let mut groups: BTreeMap<(&str, &str), Vec<AffinityRecord>> = BTreeMap::new();
    for r in records {
        groups
            .entry((r.protein_id.as_str(), r.smiles.as_str()))
            .or_default()
            .push(r.clone());
    }
    groups.into_values().map(|g| dedup(&g, policy)).collect()
}

pub fn binarize(value_nm: f64) -> bool {
    value_nm < ACTIVE_BELOW_NM
}

/// Sparse protein × fragment matrix of observed labels. Columns follow the
/// fragment library order; rows are proteins in sorted order.
#[derive(Debug, Clone, PartialEq)]
pub struct LabelMatrix {
    proteins: Vec<String>,
    fragments: Vec<String>,
    /// Per protein: (fragment column, label) sorted by column.
    rows: Vec<Vec<(usize, bool)>>,
}

impl LabelMatrix {
    pub fn new(fragments: Vec<String>) -> Self {
        LabelMatrix {
            proteins: Vec::new(),
            fragments,
            rows: Vec::new(),
        }
    }

    pub fn proteins(&self) -> &[String] {
        &self.proteins
    }

    pub fn fragments(&self) -> &[String] {
        &self.fragments
    }

    pub fn protein_index(&self, protein_id: &str) -> Option<usize> {
        self.proteins.binary_search_by(|p| p.as_str().cmp(protein_id)).ok()
    }

    pub fn row(&self, protein: usize) -> &[(usize, bool)] {
        &self.rows[protein]
    }

    pub fn get(&self, protein: usize, fragment: usize) -> Option<bool> {
        let row = &self.rows[protein];
        row.binary_search_by_key(&fragment, |e| e.0).ok().map(|i| row[i].1)
    }

    pub fn label(&self, protein_id: &str, fragment_id: &str) -> Option<bool> {
        let p = self.protein_index(protein_id)?;
        let f = self.fragments.iter().position(|x| x == fragment_id)?;
        self.get(p, f)
    }

    pub fn n_observed(&self) -> usize {
        self.rows.iter().map(Vec::len).sum()
    }

    pub fn n_positive(&self) -> usize {
        self.rows.iter().flatten().filter(|e| e.1).count()
    }

    /// Inserts or replaces a protein row.
    pub fn set_row(&mut self, protein_id: &str, mut entries: Vec<(usize, bool)>) {
        entries.sort_by_key(|e| e.0);
        entries.dedup_by_key(|e| e.0);
        match self.proteins.binary_search_by(|p| p.as_str().cmp(protein_id)) {
            Ok(i) => self.rows[i] = entries,
            Err(i) => {
                self.proteins.insert(i, protein_id.to_string());
                self.rows.insert(i, entries);
            }
        }
    }

    /// `protein_id<TAB>fragment_id<TAB>0|1`; NA entries are omitted.
    pub fn write_tsv(&self, mut w: impl Write) -> Result<()> {
        for (p, row) in self.proteins.iter().zip(&self.rows) {
            for &(f, v) in row {
                writeln!(w, "{p}\t{}\t{}", self.fragments[f], u8::from(v))?;
            }
        }
        Ok(())
    }

    pub fn read_tsv(reader: impl BufRead, path: &Path, fragments: &[String]) -> Result<Self> {
        let col: HashMap<&str, usize> = fragments.iter().enumerate().map(|(i, f)| (f.as_str(), i)).collect();
        let mut rows: BTreeMap<String, Vec<(usize, bool)>> = BTreeMap::new();
        for item in data_lines(reader) {
            let (n, line) = item?;
            let cols: Vec<&str> = line.split('\t').collect();
            if cols.len() != 3 {
                return Err(Error::parse(path, n, "expected protein_id<TAB>fragment_id<TAB>0|1"));
            }
            let f = *col
                .get(cols[1])
                .ok_or_else(|| Error::UnknownFragment(cols[1].to_string()))?;
            let v = match cols[2].trim() {
                "0" => false,
                "1" => true,
                other => return Err(Error::parse(path, n, format!("label must be 0 or 1, got {other:?}"))),
            };
            rows.entry(cols[0].to_string()).or_default().push((f, v));
        }
        let mut m = LabelMatrix::new(fragments.to_vec());
        for (p, entries) in rows {
            m.set_row(&p, entries);
        }
        Ok(m)
    }
}

/// A tested (protein, ligand) pair after deduplication and binarization.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Interaction {
    pub protein_id: String,
    pub smiles: String,
    pub active: bool,
}

impl From<&AffinityRecord> for Interaction {
    fn from(r: &AffinityRecord) -> Self {
        Interaction {
            protein_id: r.protein_id.clone(),
            smiles: r.smiles.clone(),
            active: binarize(r.value_nm),
        }
    }
}

/// Fragment f is privileged (1) for protein p when it occurs in more than
/// half of p's active ligands; it is 0 when it occurs in some ligand tested
/// against p without meeting that bar; otherwise it is unobserved. Proteins
/// with fewer than `min_actives` actives get no 1-labels.
pub fn label_matrix(interactions: &[Interaction], lib: &FragmentLibrary, min_actives: usize) -> Result<LabelMatrix> {
    if interactions.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let ligands: Vec<&str> = interactions
        .iter()
        .map(|i| i.smiles.as_str())
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let contained: Vec<Vec<usize>> = ligands
        .par_iter()
        .map(|s| parse_smiles(s).map(|m| lib.contained_in(&m)))
        .collect::<Result<_>>()?;
    let frags_of: HashMap<&str, &Vec<usize>> = ligands.iter().copied().zip(&contained).collect();

    let mut by_protein: BTreeMap<&str, Vec<&Interaction>> = BTreeMap::new();
    for i in interactions {
        by_protein.entry(i.protein_id.as_str()).or_default().push(i);
    }
    let rows: Vec<(&str, Vec<(usize, bool)>)> = by_protein
        .into_par_iter()
        .map(|(p, tested)| {
            let mut seen: BTreeMap<&str, bool> = BTreeMap::new();
            for t in &tested {
                *seen.entry(t.smiles.as_str()).or_default() |= t.active;
            }
            let n_active = seen.values().filter(|&&a| a).count();
            let mut active_hits: BTreeMap<usize, usize> = BTreeMap::new();
            for (s, &active) in &seen {
                for &f in frags_of[s] {
                    let e = active_hits.entry(f).or_default();
                    if active {
                        *e += 1;
                    }
                }
            }
            let row = active_hits
                .into_iter()
                .map(|(f, hits)| {
                    let privileged = n_active > 0 && n_active >= min_actives && 2 * hits > n_active;
                    (f, privileged)
                })
                .collect();
            (p, row)
        })
        .collect();
    let mut m = LabelMatrix::new(lib.fragments().iter().map(|f| f.fragment_id.clone()).collect());
    for (p, row) in rows {
        m.set_row(p, row);
    }
    Ok(m)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SplitMode {
    NovelProtein,
    NovelLigand,
    NovelComplex,
}

impl SplitMode {
    pub const ALL: [SplitMode; 3] = [SplitMode::NovelProtein, SplitMode::NovelLigand, SplitMode::NovelComplex];

    pub fn name(self) -> &'static str {
        match self {
            SplitMode::NovelProtein => "novel_protein",
            SplitMode::NovelLigand => "novel_ligand",
            SplitMode::NovelComplex => "novel_complex",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub mode: SplitMode,
    pub ratios: (f64, f64, f64),
    pub seed: u64,
}

impl SplitSpec {
    pub fn new(mode: SplitMode, seed: u64) -> Self {
        SplitSpec {
            mode,
            ratios: (0.8, 0.1, 0.1),
            seed,
        }
    }
}

/// Pair indices per set. Single-mode splits use `train`, `val`, `test`;
/// joint splits use `train` plus `val_<mode>` / `test_<mode>`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Splits {
    pub seed: u64,
    pub sets: BTreeMap<String, Vec<usize>>,
}

impl Splits {
    pub fn get(&self, name: &str) -> Option<&[usize]> {
        self.sets.get(name).map(Vec::as_slice)
    }
}

/// Seeded 3-way partition of `entities` (deduplicated, sorted first).
fn partition<'a>(
    entities: impl IntoIterator<Item = &'a str>,
    ratios: (f64, f64, f64),
    rng: &mut ChaCha8Rng,
    what: &str,
) -> Result<[BTreeSet<&'a str>; 3]> {
    let mut items: Vec<&str> = entities.into_iter().collect::<BTreeSet<_>>().into_iter().collect();
    let n = items.len();
    if n < 3 {
        return Err(Error::InsufficientEntities(format!(
            "{n} distinct {what}, need at least 3"
        )));
    }
    let n_val = ((ratios.1 * n as f64).round() as usize).max(1);
    let n_test = ((ratios.2 * n as f64).round() as usize).max(1);
    if n_val + n_test >= n {
        return Err(Error::InsufficientEntities(format!(
            "{n} distinct {what} leave no training set"
        )));
    }
    items.shuffle(rng);
    let n_train = n - n_val - n_test;
    Ok([
        items[..n_train].iter().copied().collect(),
        items[n_train..n_train + n_val].iter().copied().collect(),
        items[n_train + n_val..].iter().copied().collect(),
    ])
}

fn check_ratios(r: (f64, f64, f64)) -> Result<()> {
    let ok = [r.0, r.1, r.2].iter().all(|v| v.is_finite() && *v >= 0.0) && (r.0 + r.1 + r.2 - 1.0).abs() < 1e-9;
    if ok {
        Ok(())
    } else {
        Err(Error::Value(format!(
            "split ratios {r:?} must be non-negative and sum to 1"
        )))
    }
}

/// Splits (protein, ligand) pairs by the given regime. In `novel_complex`
/// pairs that mix partitions (e.g. a validation protein with a training
/// ligand) are left out of every set.
pub fn split(pairs: &[(String, String)], spec: &SplitSpec) -> Result<Splits> {
    check_ratios(spec.ratios)?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut sets: [Vec<usize>; 3] = Default::default();
    match spec.mode {
        SplitMode::NovelProtein | SplitMode::NovelLigand => {
            let by_protein = spec.mode == SplitMode::NovelProtein;
            fn key(p: &(String, String), by_protein: bool) -> &str {
                if by_protein {
                    &p.0
                } else {
                    &p.1
                }
            }
            let what = if by_protein { "proteins" } else { "ligands" };
            let parts = partition(pairs.iter().map(|p| key(p, by_protein)), spec.ratios, &mut rng, what)?;
            for (i, p) in pairs.iter().enumerate() {
                let k = key(p, by_protein);
                let s = parts.iter().position(|part| part.contains(k)).unwrap();
                sets[s].push(i);
            }
        }
        SplitMode::NovelComplex => {
            let prot = partition(pairs.iter().map(|p| p.0.as_str()), spec.ratios, &mut rng, "proteins")?;
            let lig = partition(pairs.iter().map(|p| p.1.as_str()), spec.ratios, &mut rng, "ligands")?;
            for (i, p) in pairs.iter().enumerate() {
                let a = prot.iter().position(|part| part.contains(p.0.as_str())).unwrap();
                let b = lig.iter().position(|part| part.contains(p.1.as_str())).unwrap();
                if a == b {
                    sets[a].push(i);
                }
            }
        }
    }
    let [train, val, test] = sets;
    Ok(Splits {
        seed: spec.seed,
        sets: BTreeMap::from([("train".into(), train), ("val".into(), val), ("test".into(), test)]),
    })
}

/// Partitions proteins and ligands once and derives all three regimes from
/// the same partitions, so one training set has a validation and a test set
/// for every regime:
/// train = P_train × L_train, novel_protein = P_x × L_train,
/// novel_ligand = P_train × L_x, novel_complex = P_x × L_x (x = val / test).
pub fn joint_split(pairs: &[(String, String)], ratios: (f64, f64, f64), seed: u64) -> Result<Splits> {
    check_ratios(ratios)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let prot = partition(pairs.iter().map(|p| p.0.as_str()), ratios, &mut rng, "proteins")?;
    let lig = partition(pairs.iter().map(|p| p.1.as_str()), ratios, &mut rng, "ligands")?;
    let mut sets: BTreeMap<String, Vec<usize>> = BTreeMap::new();
    sets.insert("train".into(), Vec::new());
    for stage in ["val", "test"] {
        for mode in SplitMode::ALL {
            sets.insert(format!("{stage}_{}", mode.name()), Vec::new());
        }
    }
    for (i, p) in pairs.iter().enumerate() {
        let a = prot.iter().position(|part| part.contains(p.0.as_str())).unwrap();
        let b = lig.iter().position(|part| part.contains(p.1.as_str())).unwrap();
        let name = match (a, b) {
            (0, 0) => "train".to_string(),
            (x, 0) => format!("{}_novel_protein", ["", "val", "test"][x]),
            (0, y) => format!("{}_novel_ligand", ["", "val", "test"][y]),
            (x, y) if x == y => format!("{}_novel_complex", ["", "val", "test"][x]),
            _ => continue,
        };
        sets.get_mut(&name).unwrap().push(i);
    }
    Ok(Splits { seed, sets })
}
