//! Classification and ranking metrics.

use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Confusion {
    pub tp: u64,
    pub fp: u64,
    pub tn: u64,
    pub fn_: u64,
}

impl Confusion {
    pub fn from_calls(calls: &[bool], truth: &[bool]) -> Self {
        assert_eq!(calls.len(), truth.len(), "calls and truth differ in length");
        let mut c = Confusion::default();
        for (&p, &t) in calls.iter().zip(truth) {
            c.add(p, t);
        }
        c
    }

    pub fn add(&mut self, call: bool, truth: bool) {
        match (call, truth) {
            (true, true) => self.tp += 1,
            (true, false) => self.fp += 1,
            (false, false) => self.tn += 1,
            (false, true) => self.fn_ += 1,
        }
    }

    pub fn total(&self) -> u64 {
        self.tp + self.fp + self.tn + self.fn_
    }

    /// tp / (tp + fp); 0 when nothing is called positive.
    pub fn precision(&self) -> f64 {
        let d = self.tp + self.fp;
        if d == 0 {
            0.0
        } else {
            self.tp as f64 / d as f64
        }
    }

    /// Matthews correlation; 0 when any marginal is empty.
    pub fn mcc(&self) -> f64 {
        let (tp, fp, tn, fn_) = (self.tp as f64, self.fp as f64, self.tn as f64, self.fn_ as f64);
        let d = (tp + fp) * (tp + fn_) * (tn + fp) * (tn + fn_);
        if d == 0.0 {
            0.0
        } else {
            (tp * tn - fp * fn_) / d.sqrt()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BinaryMetrics {
    pub precision: f64,
    pub mcc: f64,
    pub confusion: Confusion,
}

pub fn binary_metrics(calls: &[bool], truth: &[bool]) -> BinaryMetrics {
    let confusion = Confusion::from_calls(calls, truth);
    BinaryMetrics {
        precision: confusion.precision(),
        mcc: confusion.mcc(),
        confusion,
    }
}

fn check_truth(truth: &[bool]) -> Result<(usize, usize)> {
    let pos = truth.iter().filter(|&&t| t).count();
    let neg = truth.len() - pos;
    if pos == 0 || neg == 0 {
        return Err(Error::DegenerateTruth);
    }
    Ok((pos, neg))
}

/// Probability that a random positive outranks a random negative, ties
/// counting one half. Uses average ranks, O(n log n).
pub fn auc(scores: &[f64], truth: &[bool]) -> Result<f64> {
    assert_eq!(scores.len(), truth.len(), "scores and truth differ in length");
    let (pos, neg) = check_truth(truth)?;
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    let mut rank_sum = 0.0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && scores[order[j + 1]] == scores[order[i]] {
            j += 1;
        }
        // ranks are 1-based; the tie group i..=j shares the mean rank
        let mean_rank = (i + j) as f64 / 2.0 + 1.0;
        rank_sum += mean_rank * order[i..=j].iter().filter(|&&k| truth[k]).count() as f64;
        i = j + 1;
    }
    let pos_f = pos as f64;
    Ok((rank_sum - pos_f * (pos_f + 1.0) / 2.0) / (pos_f * neg as f64))
}

/// Same quantity by explicit pair counting, O(n²).
pub fn auc_pairwise(scores: &[f64], truth: &[bool]) -> Result<f64> {
    let (pos, neg) = check_truth(truth)?;
    let mut wins = 0.0;
    for (i, &si) in scores.iter().enumerate() {
        if !truth[i] {
            continue;
        }
        for (j, &sj) in scores.iter().enumerate() {
            if truth[j] {
                continue;
            }
            if si > sj {
                wins += 1.0;
            } else if si == sj {
                wins += 0.5;
            }
        }
    }
    Ok(wins / (pos as f64 * neg as f64))
}

/// Ids ordered best first; equal scores are ordered by id.
pub fn rank_by_score(scores: &[(String, f64)], higher_is_better: bool) -> Vec<String> {
    let mut v: Vec<&(String, f64)> = scores.iter().collect();
    v.sort_by(|a, b| {
        let c = if higher_is_better {
            b.1.total_cmp(&a.1)
        } else {
            a.1.total_cmp(&b.1)
        };
        c.then_with(|| a.0.cmp(&b.0))
    });
    v.into_iter().map(|(id, _)| id.clone()).collect()
}

/// Number of molecules in the top `x_percent` of `n`, never below one.
pub fn top_count(n: usize, x_percent: f64) -> usize {
    ((x_percent * n as f64) / 100.0).ceil().max(1.0) as usize
}

/// EF_x% = (hits in top x% / size of top x%) / (all hits / all molecules).
pub fn enrichment_factor(ranked: &[String], actives: &HashSet<String>, x_percent: f64) -> Result<f64> {
    let n = ranked.len();
    let total_hits = ranked.iter().filter(|id| actives.contains(*id)).count();
    if total_hits == 0 {
        return Err(Error::NoActives);
    }
    let k = top_count(n, x_percent).min(n);
    let hits = ranked[..k].iter().filter(|id| actives.contains(*id)).count();
    Ok((hits as f64 / k as f64) / (total_hits as f64 / n as f64))
}
