//! Ranking evaluation for knowledge-base completion.
//!
//! For a test axiom `A ⊑ B` or `A ⊑ ∃r.B`, every candidate `B′` in the pool
//! is scored with the model's positive loss for the axiom with `B′` in place
//! of `B`. Lower is better. Ranks use the mid-rank tie convention
//!
//! ```text
//! rank = 1 + |{B′ : s(B′) < s(B)}| + ⌊|{B′ ≠ B : s(B′) = s(B)}| / 2⌋
//! ```
//!
//! and the per-axiom AUC is `1 − (rank − 1) / (N − 1)` with `N` the number of
//! candidates ranked (1 when `N = 1`). Filtered ranks drop every competitor
//! whose axiom is in the training set or entailed by a supplied closure; the
//! true axiom itself is never dropped.

use std::collections::{BTreeMap, HashSet};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::closure::{ClosureError, DeductiveClosure};
use crate::kb::{ConceptId, NormalizedAxiom, Signature, Variant};
use crate::loss::{axiom_loss, LossError, LossRequest};
use crate::model::GeometricModel;

#[derive(Debug, Error, PartialEq)]
pub enum EvalError {
    #[error("test axiom {0} is not a GCI0 or GCI2 axiom")]
    Unsupported(usize),
    #[error("candidate pool is empty")]
    EmptyPool,
    #[error("test axiom {0}: the true concept is not in the candidate pool")]
    TruthNotInPool(usize),
    #[error("row {row}: true index {truth} out of range for {len} scores")]
    BadRow { row: usize, truth: usize, len: usize },
    #[error("rank sets cover different test axioms")]
    Mismatch,
    #[error(transparent)]
    Loss(#[from] LossError),
    #[error(transparent)]
    Closure(#[from] ClosureError),
}

/// Denominator for micro averages.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum MicroAverage {
    /// Mean over subject classes that have test axioms.
    TestSubjects,
    /// Sum of per-subject means divided by the number of concepts in the signature.
    Signature(usize),
}

/// One test instance: scores over candidates, the index of the true candidate,
/// and which candidates the filtered setting removes.
#[derive(Clone, Debug, PartialEq)]
pub struct ScoreRow {
    pub subject: u32,
    pub scores: Vec<f64>,
    pub truth: usize,
    pub excluded: Vec<bool>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RankEntry {
    pub subject: u32,
    pub rank: f64,
    pub candidates: usize,
}

impl RankEntry {
    pub fn auc(&self) -> f64 {
        if self.candidates <= 1 {
            1.0
        } else {
            1.0 - (self.rank - 1.0) / (self.candidates - 1) as f64
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub hits10: f64,
    pub hits100: f64,
    pub macro_mr: f64,
    pub micro_mr: f64,
    pub macro_auc: f64,
    pub micro_auc: f64,
}

impl Metrics {
    fn zip(&self, o: &Metrics, f: impl Fn(f64, f64) -> f64) -> Metrics {
        Metrics {
            hits10: f(self.hits10, o.hits10),
            hits100: f(self.hits100, o.hits100),
            macro_mr: f(self.macro_mr, o.macro_mr),
            micro_mr: f(self.micro_mr, o.micro_mr),
            macro_auc: f(self.macro_auc, o.macro_auc),
            micro_auc: f(self.micro_auc, o.micro_auc),
        }
    }
}

/// Mid-rank of `scores[truth]` among the candidates not excluded.
pub fn mid_rank(scores: &[f64], truth: usize, excluded: Option<&[bool]>) -> (f64, usize) {
    let s = scores[truth];
    let (mut less, mut ties, mut n) = (0usize, 0usize, 0usize);
    for (i, &x) in scores.iter().enumerate() {
        if i != truth && excluded.is_some_and(|e| e[i]) {
            continue;
        }
        n += 1;
        if i == truth {
            continue;
        }
        if x < s {
            less += 1;
        } else if x == s {
            ties += 1;
        }
    }
    ((1 + less + ties / 2) as f64, n)
}

pub fn hits_at(entries: &[RankEntry], n: f64) -> f64 {
    if entries.is_empty() {
        return 0.0;
    }
    entries.iter().filter(|e| e.rank <= n).count() as f64 / entries.len() as f64
}

/// Aggregates a set of ranks.
pub fn metrics(entries: &[RankEntry], micro: MicroAverage) -> Metrics {
    if entries.is_empty() {
        return Metrics::default();
    }
    let n = entries.len() as f64;
    let mut per_subject: BTreeMap<u32, (f64, f64, usize)> = BTreeMap::new();
    for e in entries {
        let s = per_subject.entry(e.subject).or_insert((0.0, 0.0, 0));
        s.0 += e.rank;
        s.1 += e.auc();
        s.2 += 1;
    }
    let (mut mr, mut auc) = (0.0, 0.0);
    for &(r, a, k) in per_subject.values() {
        mr += r / k as f64;
        auc += a / k as f64;
    }
    let denom = match micro {
        MicroAverage::TestSubjects => per_subject.len(),
        MicroAverage::Signature(nc) => nc.max(1),
    } as f64;
    Metrics {
        hits10: hits_at(entries, 10.0),
        hits100: hits_at(entries, 100.0),
        macro_mr: entries.iter().map(|e| e.rank).sum::<f64>() / n,
        micro_mr: mr / denom,
        macro_auc: entries.iter().map(|e| e.auc()).sum::<f64>() / n,
        micro_auc: auc / denom,
    }
}

/// Raw and filtered ranks for every row.
pub fn rank_rows(rows: &[ScoreRow]) -> Result<(Vec<RankEntry>, Vec<RankEntry>), EvalError> {
    let mut raw = Vec::with_capacity(rows.len());
    let mut filtered = Vec::with_capacity(rows.len());
    for (i, row) in rows.iter().enumerate() {
        if row.truth >= row.scores.len() || row.excluded.len() != row.scores.len() {
            return Err(EvalError::BadRow {
                row: i,
                truth: row.truth,
                len: row.scores.len(),
            });
        }
        let (r, n) = mid_rank(&row.scores, row.truth, None);
        raw.push(RankEntry {
            subject: row.subject,
            rank: r,
            candidates: n,
        });
        let (r, n) = mid_rank(&row.scores, row.truth, Some(&row.excluded));
        filtered.push(RankEntry {
            subject: row.subject,
            rank: r,
            candidates: n,
        });
    }
    Ok((raw, filtered))
}

/// NF − F per metric. Both rank sets must describe the same test axioms.
pub fn nf_f_delta(raw: &[RankEntry], filtered: &[RankEntry], micro: MicroAverage) -> Result<Metrics, EvalError> {
    if raw.len() != filtered.len() || raw.iter().zip(filtered).any(|(a, b)| a.subject != b.subject) {
        return Err(EvalError::Mismatch);
    }
    Ok(metrics(raw, micro).zip(&metrics(filtered, micro), |a, b| a - b))
}

/// Inputs of a ranking run.
pub struct RankingTask<'a> {
    pub name: String,
    pub test: Vec<NormalizedAxiom>,
    pub pool: Vec<ConceptId>,
    pub train: HashSet<NormalizedAxiom>,
    pub closures: Vec<&'a DeductiveClosure>,
    pub micro: MicroAverage,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AxiomRank {
    pub axiom: NormalizedAxiom,
    pub raw_rank: f64,
    pub filtered_rank: f64,
    pub candidates: usize,
    pub filtered_candidates: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RankingReport {
    pub task: String,
    pub per_axiom: Vec<AxiomRank>,
    pub raw: Metrics,
    pub filtered: Metrics,
    pub nf_minus_f: Metrics,
}

fn filler_slot(ax: &NormalizedAxiom) -> Option<usize> {
    match ax.variant() {
        Variant::Gci0 | Variant::Gci2 => Some(1),
        _ => None,
    }
}

/// Scores every candidate for every test axiom and ranks the true one.
pub fn score_and_rank(m: &GeometricModel, task: &RankingTask<'_>) -> Result<RankingReport, EvalError> {
    if task.pool.is_empty() {
        return Err(EvalError::EmptyPool);
    }
    let rows: Vec<ScoreRow> = task
        .test
        .par_iter()
        .enumerate()
        .map(|(i, ax)| -> Result<ScoreRow, EvalError> {
            let slot = filler_slot(ax).ok_or(EvalError::Unsupported(i))?;
            let truth_c = ax.concept_slot(slot).expect("filler slot");
            let truth = task.pool.iter().position(|&c| c == truth_c).ok_or(EvalError::TruthNotInPool(i))?;
            let mut scores = Vec::with_capacity(task.pool.len());
            let mut excluded = Vec::with_capacity(task.pool.len());
            for (j, &c) in task.pool.iter().enumerate() {
                let cand = ax.with_concept_slot(slot, c).expect("filler slot");
                scores.push(axiom_loss(m, &LossRequest::positive(cand))?);
                let mut drop = false;
                if j != truth {
                    drop = task.train.contains(&cand.canonical());
                    for dc in &task.closures {
                        if drop {
                            break;
                        }
                        drop = dc.entails(&cand)?;
                    }
                }
                excluded.push(drop);
            }
            Ok(ScoreRow {
                subject: ax.concept_slot(0).expect("subject").0,
                scores,
                truth,
                excluded,
            })
        })
        .collect::<Result<_, _>>()?;
    let (raw, filtered) = rank_rows(&rows)?;
    let per_axiom = task
        .test
        .iter()
        .zip(raw.iter().zip(&filtered))
        .map(|(ax, (r, f))| AxiomRank {
            axiom: *ax,
            raw_rank: r.rank,
            filtered_rank: f.rank,
            candidates: r.candidates,
            filtered_candidates: f.candidates,
        })
        .collect();
    Ok(RankingReport {
        task: task.name.clone(),
        per_axiom,
        raw: metrics(&raw, task.micro),
        filtered: metrics(&filtered, task.micro),
        nf_minus_f: nf_f_delta(&raw, &filtered, task.micro)?,
    })
}

/// Drops test axioms entailed by `dc`; returns the kept axioms and the number removed.
pub fn filter_test_set(test: &[NormalizedAxiom], dc: &DeductiveClosure) -> Result<(Vec<NormalizedAxiom>, usize), EvalError> {
    let mut kept = Vec::with_capacity(test.len());
    for ax in test {
        if !dc.entails(ax)? {
            kept.push(*ax);
        }
    }
    let removed = test.len() - kept.len();
    Ok((kept, removed))
}

fn metrics_json(m: &Metrics, prefix: &str, out: &mut serde_json::Map<String, serde_json::Value>) {
    let pairs = [
        ("H@10", m.hits10),
        ("H@100", m.hits100),
        ("macro_MR", m.macro_mr),
        ("micro_MR", m.micro_mr),
        ("macro_AUC", m.macro_auc),
        ("micro_AUC", m.micro_auc),
    ];
    for (k, v) in pairs {
        out.insert(format!("{prefix}{k}"), serde_json::json!(v));
    }
}

/// `{"task", "n_test", "metrics": {H@10, …, F_H@10, …, NF_minus_F: {…}}}`
pub fn report_json(r: &RankingReport) -> serde_json::Value {
    let mut metrics = serde_json::Map::new();
    metrics_json(&r.raw, "", &mut metrics);
    metrics_json(&r.filtered, "F_", &mut metrics);
    let mut delta = serde_json::Map::new();
    metrics_json(&r.nf_minus_f, "", &mut delta);
    metrics.insert("NF_minus_F".into(), serde_json::Value::Object(delta));
    serde_json::json!({
        "task": r.task,
        "n_test": r.per_axiom.len(),
        "metrics": metrics,
    })
}

/// Per-axiom rank dump with a header row.
pub fn ranks_csv(r: &RankingReport, sig: &Signature) -> String {
    let mut out = String::from("axiom,raw_rank,filtered_rank,candidates,filtered_candidates\n");
    for a in &r.per_axiom {
        out.push_str(&format!(
            "\"{}\",{},{},{},{}\n",
            a.axiom.to_line(sig).replace('"', "\"\""),
            a.raw_rank,
            a.filtered_rank,
            a.candidates,
            a.filtered_candidates
        ));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(scores: &[f64], truth: usize) -> ScoreRow {
        ScoreRow {
            subject: 0,
            scores: scores.to_vec(),
            truth,
            excluded: vec![false; scores.len()],
        }
    }

    #[test]
    fn perfect_ranking() {
        let (raw, _) = rank_rows(&[row(&[0.1, 0.5, 0.9], 0)]).unwrap();
        assert_eq!(raw[0].rank, 1.0);
        let m = metrics(&raw, MicroAverage::TestSubjects);
        assert_eq!((m.hits10, m.macro_auc), (1.0, 1.0));
    }

    #[test]
    fn all_tied_is_mid_rank() {
        for n in 1..8 {
            let (raw, _) = rank_rows(&[row(&vec![0.5; n], n / 2)]).unwrap();
            assert_eq!(raw[0].rank, (1 + (n - 1) / 2) as f64);
        }
    }

    #[test]
    fn one_filtered_competitor() {
        let mut r = row(&[0.4, 0.1, 0.9, 0.2], 0);
        r.excluded[1] = true;
        let (raw, filt) = rank_rows(&[r]).unwrap();
        assert_eq!(raw[0].rank, 3.0);
        assert_eq!(filt[0].rank, 2.0);
        assert_eq!(filt[0].candidates, 3);
        let d = nf_f_delta(&raw, &filt, MicroAverage::TestSubjects).unwrap();
        assert_eq!(d.macro_mr, 1.0);
        assert!(nf_f_delta(&raw, &[], MicroAverage::TestSubjects).is_err());
    }

    #[test]
    fn truth_never_filtered() {
        let mut r = row(&[0.4, 0.1], 0);
        r.excluded = vec![true, true];
        let (_, filt) = rank_rows(&[r]).unwrap();
        assert_eq!((filt[0].rank, filt[0].candidates), (1.0, 1));
        assert_eq!(filt[0].auc(), 1.0);
    }

    #[test]
    fn micro_averages_per_subject() {
        let e = |s, r| RankEntry { subject: s, rank: r, candidates: 11 };
        let entries = [e(0, 1.0), e(0, 3.0), e(1, 8.0)];
        let m = metrics(&entries, MicroAverage::TestSubjects);
        assert_eq!(m.macro_mr, 4.0);
        assert_eq!(m.micro_mr, 5.0);
        let m = metrics(&entries, MicroAverage::Signature(5));
        assert_eq!(m.micro_mr, 2.0);
    }
}
