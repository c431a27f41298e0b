//! Geometric validation of rules on solved protein–ligand complexes.
//!
//! Words are located in a chain as contiguous runs of their letters;
//! fragments are located in the ligand by substructure search. The distance
//! between a word and a fragment is the distance between the centroid of the
//! word's Cα atoms and the centroid of the fragment's heavy atoms, minimised
//! over occurrences.

use std::collections::{BTreeMap, BTreeSet};
use std::io::BufRead;
use std::ops::Range;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::chem::{
    find_substructure, find_substructure_with, Atom, Bond, BondOrder, Element, MatchOptions, Molecule, DEFAULT_MAX_HITS,
};
use crate::error::{Error, Result};
use crate::io::data_lines;

pub type Point = [f64; 3];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Residue {
    pub number: i32,
    pub insertion: Option<char>,
    pub code: char,
    pub ca: Point,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainModel {
    pub chain_id: char,
    pub residues: Vec<Residue>,
}

impl ChainModel {
    pub fn sequence(&self) -> String {
        self.residues.iter().map(|r| r.code).collect()
    }
}

pub fn three_to_one(name: &str) -> char {
    match name {
        "ALA" => 'A',
        "ARG" => 'R',
        "ASN" => 'N',
        "ASP" => 'D',
        "CYS" => 'C',
        "GLN" => 'Q',
        "GLU" => 'E',
        "GLY" => 'G',
        "HIS" => 'H',
        "ILE" => 'I',
        "LEU" => 'L',
        "LYS" => 'K',
        "MET" => 'M',
        "PHE" => 'F',
        "PRO" => 'P',
        "SER" => 'S',
        "THR" => 'T',
        "TRP" => 'W',
        "TYR" => 'Y',
        "VAL" => 'V',
        _ => 'X',
    }
}

fn column(line: &str, range: Range<usize>) -> &str {
    line.get(range.start..range.end.min(line.len())).unwrap_or("").trim()
}

fn coord(line: &str, range: Range<usize>, path: &Path, lineno: usize) -> Result<f64> {
    let s = column(line, range);
    s.parse::<f64>()
        .ok()
        .filter(|v| v.is_finite())
        .ok_or_else(|| Error::parse(path, lineno, format!("bad coordinate {s:?}")))
}

/// Cα traces of the first model: ATOM records only, altloc blank or `A`,
/// chains in order of first appearance.
pub fn parse_pdb(reader: impl BufRead, path: &Path) -> Result<Vec<ChainModel>> {
    let mut chains: Vec<ChainModel> = Vec::new();
    let mut seen: BTreeSet<(char, i32, Option<char>)> = BTreeSet::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        let lineno = i + 1;
        if line.starts_with("ENDMDL") {
            break;
        }
        if !line.starts_with("ATOM  ") || column(&line, 12..16) != "CA" {
            continue;
        }
        if line.len() < 54 {
            return Err(Error::parse(path, lineno, "ATOM record shorter than 54 columns"));
        }
        let altloc = line.as_bytes()[16] as char;
        if altloc != ' ' && altloc != 'A' {
            continue;
        }
        let chain_id = line.as_bytes()[21] as char;
        let number: i32 = column(&line, 22..26)
            .parse()
            .map_err(|_| Error::parse(path, lineno, format!("bad residue number {:?}", column(&line, 22..26))))?;
        let icode = line.as_bytes()[26] as char;
        let insertion = (icode != ' ').then_some(icode);
        if !seen.insert((chain_id, number, insertion)) {
            continue;
        }
        let ca = [
            coord(&line, 30..38, path, lineno)?,
            coord(&line, 38..46, path, lineno)?,
            coord(&line, 46..54, path, lineno)?,
        ];
        let residue = Residue {
            number,
            insertion,
            code: three_to_one(column(&line, 17..20)),
            ca,
        };
        match chains.iter_mut().find(|c| c.chain_id == chain_id) {
            Some(c) => c.residues.push(residue),
            None => chains.push(ChainModel {
                chain_id,
                residues: vec![residue],
            }),
        }
    }
    Ok(chains)
}

#[derive(Debug, Clone, PartialEq)]
pub struct LigandModel {
    pub molecule: Molecule,
    /// Per heavy atom, aligned with `molecule` atom indices.
    pub coords: Vec<Point>,
}

fn charge_code(code: i32) -> i8 {
    match code {
        1 => 3,
        2 => 2,
        3 => 1,
        5 => -1,
        6 => -2,
        7 => -3,
        _ => 0,
    }
}

/// V2000 connection table. Hydrogens are removed and the remaining atoms
/// renumbered in file order; `M  CHG` lines override atom-block charges.
pub fn parse_mol(reader: impl BufRead, path: &Path) -> Result<LigandModel> {
    let lines: Vec<String> = reader.lines().collect::<std::io::Result<_>>()?;
    let counts = lines
        .get(3)
        .ok_or_else(|| Error::parse(path, lines.len(), "missing counts line"))?;
    if !counts.contains("V2000") {
        return Err(Error::parse(path, 4, "only V2000 connection tables are supported"));
    }
    let n_atoms: usize = column(counts, 0..3)
        .parse()
        .map_err(|_| Error::parse(path, 4, "bad atom count"))?;
    let n_bonds: usize = column(counts, 3..6)
        .parse()
        .map_err(|_| Error::parse(path, 4, "bad bond count"))?;
    if lines.len() < 4 + n_atoms + n_bonds {
        return Err(Error::parse(
            path,
            lines.len(),
            format!("counts line declares {n_atoms} atoms and {n_bonds} bonds, file is too short"),
        ));
    }
    let mut elements = Vec::with_capacity(n_atoms);
    let mut charges = Vec::with_capacity(n_atoms);
    let mut all_coords = Vec::with_capacity(n_atoms);
    for k in 0..n_atoms {
        let lineno = 5 + k;
        let l = &lines[4 + k];
        let xyz = [
            coord(l, 0..10, path, lineno)?,
            coord(l, 10..20, path, lineno)?,
            coord(l, 20..30, path, lineno)?,
        ];
        let sym = column(l, 31..34);
        let element = Element::from_symbol(sym)
            .filter(|e| !e.is_wildcard())
            .ok_or_else(|| Error::parse(path, lineno, format!("unknown element {sym:?}")))?;
        let code: i32 = column(l, 36..39).parse().unwrap_or(0);
        elements.push(element);
        charges.push(charge_code(code));
        all_coords.push(xyz);
    }
    let mut raw_bonds = Vec::with_capacity(n_bonds);
    for k in 0..n_bonds {
        let lineno = 5 + n_atoms + k;
        let l = &lines[4 + n_atoms + k];
        let field = |r: Range<usize>| -> Result<usize> {
            column(l, r.clone())
                .parse()
                .map_err(|_| Error::parse(path, lineno, format!("bad bond field {:?}", column(l, r))))
        };
        let (a, b, t) = (field(0..3)?, field(3..6)?, field(6..9)?);
        if a == 0 || b == 0 || a > n_atoms || b > n_atoms || a == b {
            return Err(Error::parse(
                path,
                lineno,
                format!("bond {a}-{b} outside 1..={n_atoms}"),
            ));
        }
        let order = match t {
            1 => BondOrder::Single,
            2 => BondOrder::Double,
            3 => BondOrder::Triple,
            4 => BondOrder::Aromatic,
            _ => return Err(Error::parse(path, lineno, format!("unsupported bond type {t}"))),
        };
        raw_bonds.push((a - 1, b - 1, order));
    }
    for (k, l) in lines.iter().enumerate().skip(4 + n_atoms + n_bonds) {
        if l.starts_with("M  END") {
            break;
        }
        if let Some(rest) = l.strip_prefix("M  CHG") {
            let v: Vec<i32> = rest.split_whitespace().filter_map(|s| s.parse().ok()).collect();
            for pair in v.get(1..).unwrap_or(&[]).chunks(2) {
                if let [idx, ch] = *pair {
                    let idx = idx as usize;
                    if idx == 0 || idx > n_atoms {
                        return Err(Error::parse(
                            path,
                            k + 1,
                            format!("charge on atom {idx} outside 1..={n_atoms}"),
                        ));
                    }
                    charges[idx - 1] = ch as i8;
                }
            }
        }
    }

    let mut new_index = vec![usize::MAX; n_atoms];
    let mut atoms = Vec::new();
    let mut coords = Vec::new();
    for k in 0..n_atoms {
        if elements[k] == Element::H {
            continue;
        }
        new_index[k] = atoms.len();
        let mut a = Atom::new(elements[k]);
        a.charge = charges[k];
        atoms.push(a);
        coords.push(all_coords[k]);
    }
    let mut bonds = Vec::new();
    for (a, b, order) in raw_bonds {
        let (na, nb) = (new_index[a], new_index[b]);
        if na == usize::MAX || nb == usize::MAX {
            continue;
        }
        if order == BondOrder::Aromatic {
            atoms[na].aromatic = true;
            atoms[nb].aromatic = true;
        }
        bonds.push(Bond { a: na, b: nb, order });
    }
    let mut molecule = Molecule::new(atoms, bonds, path.display().to_string())
        .map_err(|e| Error::parse(path, 4, format!("invalid connection table: {e}")))?;
    molecule
        .fill_hydrogens()
        .map_err(|e| Error::parse(path, 4, format!("invalid connection table: {e}")))?;
    Ok(LigandModel { molecule, coords })
}

/// Residue index windows whose letters spell `key`, overlaps included.
pub fn locate_word(key: &str, chain: &ChainModel) -> Vec<Range<usize>> {
    let key: Vec<char> = key.chars().collect();
    let seq: Vec<char> = chain.residues.iter().map(|r| r.code).collect();
    if key.is_empty() || key.len() > seq.len() {
        return Vec::new();
    }
    (0..=seq.len() - key.len())
        .filter(|&s| seq[s..s + key.len()] == key[..])
        .map(|s| s..s + key.len())
        .collect()
}

pub fn centroid(points: &[Point]) -> Result<Point> {
    if points.is_empty() {
        return Err(Error::EmptySet);
    }
    let n = points.len() as f64;
    let mut c = [0.0; 3];
    for p in points {
        for k in 0..3 {
            c[k] += p[k];
        }
    }
    Ok(c.map(|v| v / n))
}

pub fn distance(a: &Point, b: &Point) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2) + (a[2] - b[2]).powi(2)).sqrt()
}

/// Word occurrence: a chain and a residue window in it.
#[derive(Debug, Clone, PartialEq)]
pub struct WordSite {
    pub chain: usize,
    pub window: Range<usize>,
}

pub fn locate_word_in(key: &str, chains: &[ChainModel]) -> Vec<WordSite> {
    chains
        .iter()
        .enumerate()
        .flat_map(|(c, ch)| {
            locate_word(key, ch)
                .into_iter()
                .map(move |window| WordSite { chain: c, window })
        })
        .collect()
}

/// Minimum centroid distance over every (word occurrence, fragment
/// occurrence) pair. Fragment occurrences are ligand atom sets.
pub fn pair_distance(
    sites: &[WordSite],
    fragment_sites: &[Vec<usize>],
    chains: &[ChainModel],
    ligand: &LigandModel,
) -> Result<f64> {
    if sites.is_empty() || fragment_sites.is_empty() {
        return Err(Error::EmptySet);
    }
    let mut best = f64::INFINITY;
    let frag_centroids: Vec<Point> = fragment_sites
        .iter()
        .map(|atoms| centroid(&atoms.iter().map(|&a| ligand.coords[a]).collect::<Vec<_>>()))
        .collect::<Result<_>>()?;
    for s in sites {
        let pts: Vec<Point> = chains[s.chain].residues[s.window.clone()]
            .iter()
            .map(|r| r.ca)
            .collect();
        let wc = centroid(&pts)?;
        for fc in &frag_centroids {
            best = best.min(distance(&wc, fc));
        }
    }
    Ok(best)
}

/// A complex ready for analysis. `reference` is the ligand graph from its
/// SMILES, used for fragment matching with full aromaticity; its atoms are
/// mapped onto the connection table by topology.
#[derive(Debug, Clone)]
pub struct Complex {
    pub complex_id: String,
    pub chains: Vec<ChainModel>,
    pub ligand: LigandModel,
    reference_to_ligand: Option<(Molecule, Vec<usize>)>,
}

impl Complex {
    pub fn new(complex_id: &str, chains: Vec<ChainModel>, ligand: LigandModel, reference: Option<Molecule>) -> Self {
        let reference_to_ligand = reference.and_then(|r| {
            if r.atom_count() != ligand.molecule.atom_count() {
                log::warn!("{complex_id}: SMILES and connection table differ in heavy atom count");
                return None;
            }
            match find_substructure_with(&r, &ligand.molecule, 1, MatchOptions::topology_only()) {
                Ok(hits) if !hits.is_empty() => Some((r, hits[0].target_atoms())),
                // a symmetric ligand can overflow the single-hit limit; any
                // hit is a valid alignment then, so retry without the limit
                Err(Error::HitLimitExceeded { .. }) => {
                    find_substructure_with(&r, &ligand.molecule, DEFAULT_MAX_HITS, MatchOptions::topology_only())
                        .ok()
                        .and_then(|h| h.first().map(|m| (r, m.target_atoms())))
                }
                _ => {
                    log::warn!("{complex_id}: SMILES does not align with the connection table");
                    None
                }
            }
        });
        Complex {
            complex_id: complex_id.to_string(),
            chains,
            ligand,
            reference_to_ligand,
        }
    }

    /// Ligand atom sets where `fragment` occurs.
    pub fn fragment_sites(&self, fragment: &Molecule) -> Result<Vec<Vec<usize>>> {
        match &self.reference_to_ligand {
            Some((r, map)) => Ok(find_substructure(fragment, r, DEFAULT_MAX_HITS)?
                .into_iter()
                .map(|m| m.target_atoms().into_iter().map(|a| map[a]).collect())
                .collect()),
            None => Ok(find_substructure_with(
                fragment,
                &self.ligand.molecule,
                DEFAULT_MAX_HITS,
                MatchOptions::topology_only(),
            )?
            .into_iter()
            .map(|m| m.target_atoms())
            .collect()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PairSource {
    Rule,
    Random,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairDistance {
    pub complex_id: String,
    pub word_key: String,
    pub fragment_id: String,
    pub distance: f64,
    pub source: PairSource,
}

/// `n` uniform draws (with replacement) from `pool`, relabelled as random.
pub fn random_control(pool: &[PairDistance], n: usize, seed: u64) -> Result<Vec<PairDistance>> {
    if n == 0 {
        return Ok(Vec::new());
    }
    if pool.is_empty() {
        return Err(Error::EmptySet);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok((0..n)
        .map(|_| {
            let mut p = pool[rng.random_range(0..pool.len())].clone();
            p.source = PairSource::Random;
            p
        })
        .collect())
}

/// Distances for every located (word, fragment) pair in one complex.
pub fn complex_distances(
    complex: &Complex,
    words: &[String],
    fragments: &[(String, Molecule)],
    source: PairSource,
) -> Result<Vec<PairDistance>> {
    let mut frag_sites = Vec::new();
    for (id, f) in fragments {
        let s = complex.fragment_sites(f)?;
        if !s.is_empty() {
            frag_sites.push((id, s));
        }
    }
    let mut out = Vec::new();
    for w in words {
        let sites = locate_word_in(w, &complex.chains);
        if sites.is_empty() {
            continue;
        }
        for (fid, fs) in &frag_sites {
            out.push(PairDistance {
                complex_id: complex.complex_id.clone(),
                word_key: w.clone(),
                fragment_id: fid.to_string(),
                distance: pair_distance(&sites, fs, &complex.chains, &complex.ligand)?,
                source,
            });
        }
    }
    Ok(out)
}

/// Distances for rule pairs in every complex, where both the word and the
/// fragment occur.
pub fn rule_distances(
    complexes: &[Complex],
    rules: &BTreeSet<(String, String)>,
    fragments: &BTreeMap<String, Molecule>,
) -> Result<Vec<PairDistance>> {
    let mut by_fragment: BTreeMap<&str, Vec<String>> = BTreeMap::new();
    for (w, f) in rules {
        by_fragment.entry(f.as_str()).or_default().push(w.clone());
    }
    let mut out = Vec::new();
    for c in complexes {
        for (fid, words) in &by_fragment {
            let Some(m) = fragments.get(*fid) else {
                return Err(Error::UnknownFragment(fid.to_string()));
            };
            out.extend(complex_distances(
                c,
                words,
                &[(fid.to_string(), m.clone())],
                PairSource::Rule,
            )?);
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PMethod {
    Exact,
    Normal,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MannWhitney {
    pub u_a: f64,
    pub u_b: f64,
    pub p_two_sided: f64,
    /// Alternative: values in `a` tend to be smaller.
    pub p_less: f64,
    /// Alternative: values in `a` tend to be larger.
    pub p_greater: f64,
    pub method: PMethod,
}

/// Midranks (1-based) of the pooled sample and the tie-group sizes.
fn midranks(pooled: &[f64]) -> (Vec<f64>, Vec<usize>) {
    let mut order: Vec<usize> = (0..pooled.len()).collect();
    order.sort_by(|&x, &y| pooled[x].total_cmp(&pooled[y]));
    let mut ranks = vec![0.0; pooled.len()];
    let mut ties = Vec::new();
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && pooled[order[j + 1]] == pooled[order[i]] {
            j += 1;
        }
        let r = (i + j) as f64 / 2.0 + 1.0;
        for &k in &order[i..=j] {
            ranks[k] = r;
        }
        ties.push(j - i + 1);
        i = j + 1;
    }
    (ranks, ties)
}

fn u_statistic(a: &[f64], b: &[f64]) -> (f64, Vec<f64>, Vec<usize>) {
    let pooled: Vec<f64> = a.iter().chain(b).copied().collect();
    let (ranks, ties) = midranks(&pooled);
    let na = a.len() as f64;
    let ra: f64 = ranks[..a.len()].iter().sum();
    (ra - na * (na + 1.0) / 2.0, ranks, ties)
}

fn check_samples(a: &[f64], b: &[f64]) -> Result<()> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::EmptySet);
    }
    if a.iter().chain(b).any(|v| !v.is_finite()) {
        return Err(Error::Value("Mann-Whitney samples must be finite".into()));
    }
    Ok(())
}

/// Exact permutation distribution of U given the pooled midranks, by
/// dynamic programming over (items seen, items chosen, doubled rank sum).
pub fn mann_whitney_exact(a: &[f64], b: &[f64]) -> Result<MannWhitney> {
    check_samples(a, b)?;
    let (u_a, ranks, _) = u_statistic(a, b);
    let (na, nb) = (a.len(), b.len());
    // doubled midranks are integers
    let r2: Vec<usize> = ranks.iter().map(|r| (2.0 * r).round() as usize).collect();
    let max_sum: usize = {
        let mut s = r2.clone();
        s.sort_unstable_by(|x, y| y.cmp(x));
        s[..na].iter().sum()
    };
    // counts[k][s]: subsets of size k with doubled rank sum s
    let mut counts = vec![vec![0.0f64; max_sum + 1]; na + 1];
    counts[0][0] = 1.0;
    for (seen, &r) in r2.iter().enumerate() {
        for k in (1..=na.min(seen + 1)).rev() {
            let (lo, hi) = counts.split_at_mut(k);
            let prev = &lo[k - 1];
            let cur = &mut hi[0];
            for s in (r..=max_sum).rev() {
                if prev[s - r] != 0.0 {
                    cur[s] += prev[s - r];
                }
            }
        }
    }
    let total: f64 = counts[na].iter().sum();
    let offset2 = na * (na + 1); // doubled na(na+1)/2
    let u2 = (2.0 * u_a).round() as usize;
    let (mut le, mut ge) = (0.0, 0.0);
    for (s, &c) in counts[na].iter().enumerate() {
        if c == 0.0 {
            continue;
        }
        let u = s - offset2;
        if u <= u2 {
            le += c;
        }
        if u >= u2 {
            ge += c;
        }
    }
    let (p_less, p_greater) = (le / total, ge / total);
    Ok(MannWhitney {
        u_a,
        u_b: (na * nb) as f64 - u_a,
        p_two_sided: (2.0 * p_less.min(p_greater)).min(1.0),
        p_less,
        p_greater,
        method: PMethod::Exact,
    })
}

/// Normal approximation with tie-corrected variance and continuity
/// correction.
pub fn mann_whitney_normal(a: &[f64], b: &[f64]) -> Result<MannWhitney> {
    check_samples(a, b)?;
    let (u_a, _, ties) = u_statistic(a, b);
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let n = na + nb;
    let mu = na * nb / 2.0;
    let tie_term: f64 = ties.iter().map(|&t| (t as f64).powi(3) - t as f64).sum::<f64>();
    let var = na * nb / 12.0 * ((n + 1.0) - tie_term / (n * (n - 1.0)).max(1.0));
    let u_b = na * nb - u_a;
    if var <= 0.0 {
        return Ok(MannWhitney {
            u_a,
            u_b,
            p_two_sided: 1.0,
            p_less: 1.0,
            p_greater: 1.0,
            method: PMethod::Normal,
        });
    }
    let sd = var.sqrt();
    let z = Normal::new(0.0, 1.0).expect("unit normal");
    let p_less = z.cdf(((u_a - mu + 0.5) / sd).min(f64::MAX));
    let p_greater = z.sf((u_a - mu - 0.5) / sd);
    let p_two_sided = (2.0 * z.sf(((u_a - mu).abs() - 0.5).max(0.0) / sd)).min(1.0);
    Ok(MannWhitney {
        u_a,
        u_b,
        p_two_sided,
        p_less: p_less.min(1.0),
        p_greater: p_greater.min(1.0),
        method: PMethod::Normal,
    })
}

/// Exact distribution when either sample has fewer than 8 values, normal
/// approximation otherwise.
pub fn mann_whitney_u(a: &[f64], b: &[f64]) -> Result<MannWhitney> {
    if a.len() < 8 || b.len() < 8 {
        // the DP runs over the smaller sample's subset sizes
        if a.len() <= b.len() {
            mann_whitney_exact(a, b)
        } else {
            let r = mann_whitney_exact(b, a)?;
            Ok(MannWhitney {
                u_a: r.u_b,
                u_b: r.u_a,
                p_two_sided: r.p_two_sided,
                p_less: r.p_greater,
                p_greater: r.p_less,
                method: r.method,
            })
        }
    } else {
        mann_whitney_normal(a, b)
    }
}

pub fn median(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    Some(if n % 2 == 1 {
        v[n / 2]
    } else {
        (v[n / 2 - 1] + v[n / 2]) / 2.0
    })
}

/// Share of distances at or below `threshold`.
pub fn fraction_within(values: &[f64], threshold: f64) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    Some(values.iter().filter(|&&d| d <= threshold).count() as f64 / values.len() as f64)
}

pub const CONTACT_DISTANCE: f64 = 15.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StructvalReport {
    pub n_rule: usize,
    pub n_random: usize,
    pub median_rule: Option<f64>,
    pub median_random: Option<f64>,
    pub within_15_rule: Option<f64>,
    pub within_15_random: Option<f64>,
    pub test: Option<MannWhitney>,
}

pub fn report(rule: &[f64], random: &[f64]) -> Result<StructvalReport> {
    let test = if rule.is_empty() || random.is_empty() {
        None
    } else {
        Some(mann_whitney_u(rule, random)?)
    };
    Ok(StructvalReport {
        n_rule: rule.len(),
        n_random: random.len(),
        median_rule: median(rule),
        median_random: median(random),
        within_15_rule: fraction_within(rule, CONTACT_DISTANCE),
        within_15_random: fraction_within(random, CONTACT_DISTANCE),
        test,
    })
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ManifestEntry {
    pub complex_id: String,
    pub pdb_path: String,
    pub mol_path: String,
    pub ligand_smiles: String,
}

/// `complex_id  pdb_path  mol_path  ligand_smiles`; relative paths are kept
/// as written.
pub fn parse_manifest(reader: impl BufRead, path: &Path) -> Result<Vec<ManifestEntry>> {
    let mut out = Vec::new();
    for item in data_lines(reader) {
        let (lineno, line) = item?;
        let f: Vec<&str> = line.split('\t').map(str::trim).collect();
        if f.len() != 4 {
            return Err(Error::parse(
                path,
                lineno,
                format!("expected 4 tab-separated fields, got {}", f.len()),
            ));
        }
        out.push(ManifestEntry {
            complex_id: f[0].to_string(),
            pdb_path: f[1].to_string(),
            mol_path: f[2].to_string(),
            ligand_smiles: f[3].to_string(),
        });
    }
    Ok(out)
}
