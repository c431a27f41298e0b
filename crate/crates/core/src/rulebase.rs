//! Rule accuracy, filtering and rule lookup for query proteins.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::io::{Read, Write};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::attribution::RuleRecord;
use crate::dataset::LabelMatrix;
use crate::error::{Error, Result};
use crate::io::{expect_magic, read_f64, read_string, read_u32, write_string};

/// Accuracy of a rule over reference proteins that carry its word.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RuleAccuracy {
    pub accuracy: f64,
    pub positives: usize,
    /// Reference proteins with the word and an observed label.
    pub observed: usize,
}

impl RuleAccuracy {
    pub fn is_defined(&self) -> bool {
        self.observed > 0
    }
}

/// Word key → reference proteins whose own segmentation produced it.
pub struct ReferenceIndex<'a> {
    by_word: HashMap<String, Vec<usize>>,
    labels: &'a LabelMatrix,
    fragment_col: HashMap<&'a str, usize>,
}

impl<'a> ReferenceIndex<'a> {
    /// `protein_words` maps protein ids to their word keys. Proteins absent
    /// from `labels` are ignored.
    pub fn new(protein_words: &BTreeMap<String, Vec<String>>, labels: &'a LabelMatrix) -> Self {
        let mut by_word: HashMap<String, Vec<usize>> = HashMap::new();
        for (pid, keys) in protein_words {
            let Some(p) = labels.protein_index(pid) else { continue };
            let distinct: BTreeSet<&String> = keys.iter().collect();
            for k in distinct {
                by_word.entry(k.clone()).or_default().push(p);
            }
        }
        let fragment_col = labels
            .fragments()
            .iter()
            .enumerate()
            .map(|(i, f)| (f.as_str(), i))
            .collect();
        ReferenceIndex {
            by_word,
            labels,
            fragment_col,
        }
    }

    /// Undefined accuracies (no observed reference protein) are reported
    /// as 0 with `observed == 0`.
    pub fn accuracy(&self, word: &str, fragment_id: &str) -> RuleAccuracy {
        let mut acc = RuleAccuracy {
            accuracy: 0.0,
            positives: 0,
            observed: 0,
        };
        let (Some(proteins), Some(&col)) = (self.by_word.get(word), self.fragment_col.get(fragment_id)) else {
            return acc;
        };
        for &p in proteins {
            match self.labels.get(p, col) {
                Some(true) => {
                    acc.positives += 1;
                    acc.observed += 1;
                }
                Some(false) => acc.observed += 1,
                None => {}
            }
        }
        if acc.observed > 0 {
            acc.accuracy = acc.positives as f64 / acc.observed as f64;
        }
        acc
    }
}

pub fn rule_accuracy(rule: &RuleRecord, reference: &ReferenceIndex<'_>) -> RuleAccuracy {
    reference.accuracy(&rule.word, &rule.fragment_id)
}

/// Fills `accuracy` and `support` on every rule; returns the number of
/// rules whose accuracy is undefined.
pub fn annotate_accuracy(rules: &mut [RuleRecord], reference: &ReferenceIndex<'_>) -> usize {
    let mut undefined = 0;
    for r in rules.iter_mut() {
        let a = rule_accuracy(r, reference);
        if !a.is_defined() {
            undefined += 1;
        }
        r.accuracy = Some(a.accuracy);
        r.support = Some(a.observed);
    }
    undefined
}

pub const MIN_ACCURACY: f64 = 0.5;

/// Drops rules with accuracy below 0.5. Rules without an accuracy are
/// treated as accuracy 0.
pub fn filter_rules(rules: Vec<RuleRecord>) -> Vec<RuleRecord> {
    rules
        .into_iter()
        .filter(|r| r.accuracy.unwrap_or(0.0) >= MIN_ACCURACY)
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Aggregation {
    #[default]
    Joint,
    Max,
    Avg,
}

impl FromStr for Aggregation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "joint" => Ok(Aggregation::Joint),
            "max" => Ok(Aggregation::Max),
            "avg" => Ok(Aggregation::Avg),
            _ => Err(Error::Value(format!("unknown aggregation {s:?} (joint|max|avg)"))),
        }
    }
}

impl fmt::Display for Aggregation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Aggregation::Joint => "joint",
            Aggregation::Max => "max",
            Aggregation::Avg => "avg",
        })
    }
}

/// 1 − Π(1 − R_i), max R_i or mean R_i. Empty input gives 0.
pub fn aggregate(scores: &[f64], method: Aggregation) -> f64 {
    if scores.is_empty() {
        return 0.0;
    }
    match method {
        Aggregation::Joint => 1.0 - scores.iter().map(|r| 1.0 - r).product::<f64>(),
        Aggregation::Max => scores.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        Aggregation::Avg => scores.iter().sum::<f64>() / scores.len() as f64,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FragmentPrediction {
    pub fragment_id: String,
    pub matched_rules: Vec<f64>,
    pub n_matched: usize,
    pub joint: f64,
    pub max: f64,
    pub avg: f64,
    /// Score under the requested aggregation.
    pub score: f64,
    pub privileged: bool,
}

/// Immutable rule store with word-key and fragment indexes.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RuleDb {
    rules: Vec<RuleRecord>,
    by_word: HashMap<String, Vec<usize>>,
    by_fragment: HashMap<String, Vec<usize>>,
}

const PWDB_MAGIC: &[u8; 4] = b"PWDB";
const PWDB_VERSION: u32 = 1;

impl RuleDb {
    /// Duplicate (word, fragment) pairs keep their highest-scoring record.
    pub fn new(rules: Vec<RuleRecord>) -> Self {
        let rules = crate::attribution::collapse_rules(rules);
        let mut by_word: HashMap<String, Vec<usize>> = HashMap::new();
        let mut by_fragment: HashMap<String, Vec<usize>> = HashMap::new();
        for (i, r) in rules.iter().enumerate() {
            by_word.entry(r.word.clone()).or_default().push(i);
            by_fragment.entry(r.fragment_id.clone()).or_default().push(i);
        }
        RuleDb {
            rules,
            by_word,
            by_fragment,
        }
    }

    pub fn rules(&self) -> &[RuleRecord] {
        &self.rules
    }

    pub fn len(&self) -> usize {
        self.rules.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rules.is_empty()
    }

    pub fn for_word(&self, word: &str) -> impl Iterator<Item = &RuleRecord> {
        self.by_word.get(word).into_iter().flatten().map(|&i| &self.rules[i])
    }

    pub fn for_fragment(&self, fragment_id: &str) -> impl Iterator<Item = &RuleRecord> {
        self.by_fragment
            .get(fragment_id)
            .into_iter()
            .flatten()
            .map(|&i| &self.rules[i])
    }

    pub fn write(&self, mut w: impl Write) -> Result<()> {
        w.write_all(PWDB_MAGIC)?;
        w.write_all(&PWDB_VERSION.to_le_bytes())?;
        w.write_all(&(self.rules.len() as u32).to_le_bytes())?;
        for r in &self.rules {
            write_string(&mut w, &r.word)?;
            write_string(&mut w, &r.fragment_id)?;
            for v in [r.pred_score, r.attr_score, r.rule_score, r.accuracy.unwrap_or(f64::NAN)] {
                w.write_all(&v.to_le_bytes())?;
            }
            w.write_all(&r.support.map_or(u32::MAX, |s| s as u32).to_le_bytes())?;
        }
        Ok(())
    }

    pub fn read(mut r: impl Read) -> Result<Self> {
        expect_magic(&mut r, PWDB_MAGIC, "PWDB")?;
        let version = read_u32(&mut r)?;
        if version != PWDB_VERSION {
            return Err(Error::Format {
                kind: "PWDB",
                msg: format!("unsupported version {version}"),
            });
        }
        let n = read_u32(&mut r)? as usize;
        let mut rules = Vec::with_capacity(n.min(1 << 20));
        for _ in 0..n {
            let word = read_string(&mut r, "PWDB")?;
            let fragment_id = read_string(&mut r, "PWDB")?;
            let pred_score = read_f64(&mut r)?;
            let attr_score = read_f64(&mut r)?;
            let rule_score = read_f64(&mut r)?;
            let accuracy = read_f64(&mut r)?;
            let support = read_u32(&mut r)?;
            rules.push(RuleRecord {
                word,
                fragment_id,
                pred_score,
                attr_score,
                rule_score,
                accuracy: (!accuracy.is_nan()).then_some(accuracy),
                support: (support != u32::MAX).then_some(support as usize),
            });
        }
        let mut rest = Vec::new();
        r.read_to_end(&mut rest)?;
        if !rest.is_empty() {
            return Err(Error::Format {
                kind: "PWDB",
                msg: format!("{} trailing bytes", rest.len()),
            });
        }
        Ok(RuleDb::new(rules))
    }
}

/// Fragment id → rule scores of every rule whose word is among the query's
/// words. Repeated query words count once; scores are ordered by word key.
pub fn match_rules(query_words: &[String], db: &RuleDb) -> BTreeMap<String, Vec<f64>> {
    let distinct: BTreeSet<&String> = query_words.iter().collect();
    let mut out: BTreeMap<String, Vec<f64>> = BTreeMap::new();
    for w in distinct {
        for r in db.for_word(w) {
            out.entry(r.fragment_id.clone()).or_default().push(r.rule_score);
        }
    }
    out
}

/// Aggregated predictions for every matched fragment, best first (ties by
/// fragment id). `privileged` is `score >= threshold`.
pub fn predict_privileged(
    query_words: &[String],
    db: &RuleDb,
    method: Aggregation,
    threshold: f64,
) -> Vec<FragmentPrediction> {
    let mut out: Vec<FragmentPrediction> = match_rules(query_words, db)
        .into_iter()
        .map(|(fragment_id, matched_rules)| {
            let joint = aggregate(&matched_rules, Aggregation::Joint);
            let max = aggregate(&matched_rules, Aggregation::Max);
            let avg = aggregate(&matched_rules, Aggregation::Avg);
            let score = match method {
                Aggregation::Joint => joint,
                Aggregation::Max => max,
                Aggregation::Avg => avg,
            };
            FragmentPrediction {
                fragment_id,
                n_matched: matched_rules.len(),
                matched_rules,
                joint,
                max,
                avg,
                score,
                privileged: score >= threshold,
            }
        })
        .collect();
    out.sort_by(|a, b| {
        b.score
            .total_cmp(&a.score)
            .then_with(|| a.fragment_id.cmp(&b.fragment_id))
    });
    out
}
