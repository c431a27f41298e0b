//! Rule-based molecule scoring, score fusion and screening metrics.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::fmt;
use std::io::Write;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::chem::{find_substructure, Molecule, DEFAULT_MAX_HITS};
use crate::error::{Error, Result};
use crate::fragment::FragmentLibrary;
use crate::rulebase::FragmentPrediction;

pub use crate::metrics::{
    auc, auc_pairwise, binary_metrics, enrichment_factor, rank_by_score, top_count, BinaryMetrics, Confusion,
};

pub const DEFAULT_CAP: usize = 10;

/// Log-frequency specificity over a fragment library.
#[derive(Debug, Clone)]
pub struct Specificity {
    log_counts: HashMap<String, f64>,
    min: f64,
    max: f64,
}

impl Specificity {
    pub fn new(lib: &FragmentLibrary) -> Self {
        let log_counts: HashMap<String, f64> = lib
            .fragments()
            .iter()
            .map(|f| (f.fragment_id.clone(), (f.count.max(1) as f64).ln()))
            .collect();
        let min = log_counts.values().copied().fold(f64::INFINITY, f64::min);
        let max = log_counts.values().copied().fold(f64::NEG_INFINITY, f64::max);
        Specificity { log_counts, min, max }
    }

    /// 1 − (L_f − L_min)/(L_max − L_min), with L = ln(count); 1 for every
    /// fragment when all counts are equal.
    pub fn get(&self, fragment_id: &str) -> Result<f64> {
        let l = *self
            .log_counts
            .get(fragment_id)
            .ok_or_else(|| Error::UnknownFragment(fragment_id.to_string()))?;
        if self.max == self.min {
            return Ok(1.0);
        }
        Ok(1.0 - (l - self.min) / (self.max - self.min))
    }
}

pub fn specificity(fragment_id: &str, lib: &FragmentLibrary) -> Result<f64> {
    Specificity::new(lib).get(fragment_id)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredFragment {
    pub fragment_id: String,
    pub s_conf: f64,
    pub s_spec: f64,
    pub s_comp: f64,
}

impl ScoredFragment {
    pub fn new(fragment_id: &str, s_conf: f64, s_spec: f64) -> Self {
        ScoredFragment {
            fragment_id: fragment_id.to_string(),
            s_conf,
            s_spec,
            s_comp: s_conf * s_spec,
        }
    }
}

/// Screening weights for one target from its privileged-fragment
/// predictions. Only predictions called privileged are kept.
pub fn score_fragments(predictions: &[FragmentPrediction], lib: &FragmentLibrary) -> Result<Vec<ScoredFragment>> {
    let spec = Specificity::new(lib);
    predictions
        .iter()
        .filter(|p| p.privileged)
        .map(|p| Ok(ScoredFragment::new(&p.fragment_id, p.score, spec.get(&p.fragment_id)?)))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoveredFragment {
    pub fragment_id: String,
    pub atoms: Vec<usize>,
    pub s_comp: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScreeningResult {
    pub molecule_id: String,
    pub pwscore: f64,
    /// Accepted fragments in acceptance order.
    pub covered: Vec<CoveredFragment>,
    /// Matched fragments rejected because an atom was at the cap.
    pub skipped: Vec<String>,
}

/// Greedy capped coverage: fragments are tried in descending s_comp (ties
/// by id); a fragment's first embedding is accepted when every atom in it
/// is covered fewer than `cap` times.
pub fn pwscore(
    molecule_id: &str,
    m: &Molecule,
    scored: &[ScoredFragment],
    lib: &FragmentLibrary,
    cap: usize,
) -> Result<ScreeningResult> {
    let mut order: Vec<&ScoredFragment> = scored.iter().collect();
    order.sort_by(|a, b| {
        b.s_comp
            .total_cmp(&a.s_comp)
            .then_with(|| a.fragment_id.cmp(&b.fragment_id))
    });
    let mut seen = HashSet::new();
    let mut counts = vec![0usize; m.atom_count()];
    let mut result = ScreeningResult {
        molecule_id: molecule_id.to_string(),
        pwscore: 0.0,
        covered: Vec::new(),
        skipped: Vec::new(),
    };
    for f in order {
        if !seen.insert(f.fragment_id.as_str()) {
            continue;
        }
        let idx = lib
            .index_of(&f.fragment_id)
            .ok_or_else(|| Error::UnknownFragment(f.fragment_id.clone()))?;
        let hits = find_substructure(lib.molecule(idx), m, DEFAULT_MAX_HITS)?;
        let Some(first) = hits.first() else { continue };
        let atoms = first.target_atoms();
        if atoms.iter().all(|&a| counts[a] < cap) {
            for &a in &atoms {
                counts[a] += 1;
            }
            result.pwscore += f.s_comp;
            result.covered.push(CoveredFragment {
                fragment_id: f.fragment_id.clone(),
                atoms,
                s_comp: f.s_comp,
            });
        } else {
            result.skipped.push(f.fragment_id.clone());
        }
    }
    Ok(result)
}

/// PWScore for every molecule, in input order.
pub fn screen(
    molecules: &[(String, Molecule)],
    scored: &[ScoredFragment],
    lib: &FragmentLibrary,
    cap: usize,
) -> Result<Vec<ScreeningResult>> {
    molecules
        .par_iter()
        .map(|(id, m)| pwscore(id, m, scored, lib, cap))
        .collect()
}

/// Results best first; ties by molecule id.
pub fn rank_results(results: &mut [ScreeningResult]) {
    results.sort_by(|a, b| {
        b.pwscore
            .total_cmp(&a.pwscore)
            .then_with(|| a.molecule_id.cmp(&b.molecule_id))
    });
}

/// `rank  molecule_id  pwscore  covered_fragments` rows, ranked.
pub fn write_screen_tsv(mut w: impl Write, results: &[ScreeningResult]) -> Result<()> {
    let mut ranked = results.to_vec();
    rank_results(&mut ranked);
    writeln!(w, "rank\tmolecule_id\tpwscore\tcovered_fragments")?;
    for (i, r) in ranked.iter().enumerate() {
        let covered: Vec<&str> = r.covered.iter().map(|c| c.fragment_id.as_str()).collect();
        writeln!(w, "{}\t{}\t{}\t{}", i + 1, r.molecule_id, r.pwscore, covered.join(","))?;
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Orientation {
    #[default]
    Higher,
    Lower,
}

impl FromStr for Orientation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "higher" => Ok(Orientation::Higher),
            "lower" => Ok(Orientation::Lower),
            _ => Err(Error::Value(format!("unknown orientation {s:?} (higher|lower)"))),
        }
    }
}

impl fmt::Display for Orientation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Orientation::Higher => "higher",
            Orientation::Lower => "lower",
        })
    }
}

fn standardize(scores: &BTreeMap<&str, f64>, orientation: Orientation) -> BTreeMap<String, f64> {
    let sign = if orientation == Orientation::Higher { 1.0 } else { -1.0 };
    let n = scores.len() as f64;
    let mean = scores.values().sum::<f64>() / n;
    let var = scores.values().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    let sd = var.sqrt();
    scores
        .iter()
        .map(|(id, v)| {
            let z = if sd > 0.0 { sign * (v - mean) / sd } else { 0.0 };
            (id.to_string(), z)
        })
        .collect()
}

fn to_map<'a>(scores: &'a [(String, f64)], which: &str) -> Result<BTreeMap<&'a str, f64>> {
    let mut m = BTreeMap::new();
    for (id, v) in scores {
        if m.insert(id.as_str(), *v).is_some() {
            return Err(Error::IdMismatch(format!("{which}: duplicate id {id}")));
        }
    }
    Ok(m)
}

/// Mean of the two orientation-corrected z-scores (population std). A
/// method with zero spread contributes 0. Output is sorted by id.
pub fn zscore_fuse(
    a: &[(String, f64)],
    b: &[(String, f64)],
    orient_a: Orientation,
    orient_b: Orientation,
) -> Result<Vec<(String, f64)>> {
    let ma = to_map(a, "first score set")?;
    let mb = to_map(b, "second score set")?;
    let ka: BTreeSet<&str> = ma.keys().copied().collect();
    let kb: BTreeSet<&str> = mb.keys().copied().collect();
    if ka != kb {
        let only: Vec<&&str> = ka.symmetric_difference(&kb).take(5).collect();
        return Err(Error::IdMismatch(format!("score sets differ, e.g. {only:?}")));
    }
    if ma.is_empty() {
        return Ok(Vec::new());
    }
    let za = standardize(&ma, orient_a);
    let zb = standardize(&mb, orient_b);
    Ok(za
        .into_iter()
        .map(|(id, x)| {
            let y = zb[&id];
            (id, (x + y) / 2.0)
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub ef_0_5pct: f64,
    pub ef_1pct: f64,
    pub ef_5pct: f64,
    pub precision: Option<f64>,
    pub mcc: Option<f64>,
    pub auc: Option<f64>,
    pub n_actives: usize,
    pub n_total: usize,
}

/// EF at 0.5/1/5 %, AUC, and precision/MCC for calls at `call_threshold`
/// (score ≥ threshold, or ≤ for lower-is-better scores).
pub fn metric_report(
    scores: &[(String, f64)],
    actives: &HashSet<String>,
    orientation: Orientation,
    call_threshold: Option<f64>,
) -> Result<MetricReport> {
    let higher = orientation == Orientation::Higher;
    let ranked = rank_by_score(scores, higher);
    let truth: Vec<bool> = scores.iter().map(|(id, _)| actives.contains(id)).collect();
    let oriented: Vec<f64> = scores.iter().map(|(_, s)| if higher { *s } else { -*s }).collect();
    let auc = match auc(&oriented, &truth) {
        Ok(v) => Some(v),
        Err(Error::DegenerateTruth) => None,
        Err(e) => return Err(e),
    };
    let (precision, mcc) = match call_threshold {
        Some(t) => {
            let calls: Vec<bool> = scores
                .iter()
                .map(|(_, s)| if higher { *s >= t } else { *s <= t })
                .collect();
            let m = binary_metrics(&calls, &truth);
            (Some(m.precision), Some(m.mcc))
        }
        None => (None, None),
    };
    Ok(MetricReport {
        ef_0_5pct: enrichment_factor(&ranked, actives, 0.5)?,
        ef_1pct: enrichment_factor(&ranked, actives, 1.0)?,
        ef_5pct: enrichment_factor(&ranked, actives, 5.0)?,
        precision,
        mcc,
        auc,
        n_actives: truth.iter().filter(|&&t| t).count(),
        n_total: scores.len(),
    })
}
