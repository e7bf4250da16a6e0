//! Stage 1: pseudo-label unlabeled pairs with the score model, regroup them by
//! document and merge them with the deduplicated annotated corpus.

use std::collections::HashSet;

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

use crate::audit::{FilterDecision, Verdict};
use crate::corpus::{dedup_for_query_model, Corpus, D2QEntry, D2QGroup, DocumentTable, PairRecord, Provenance, RelevanceLabel};
use crate::modelio::{run_batch, score, ModelError, ScoreModel};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Stage1Options {
    /// Keep pairs the score model labels 0.
    pub keep_zero_labels: bool,
    pub max_concurrency: usize,
}

impl Default for Stage1Options {
    fn default() -> Self {
        Stage1Options {
            keep_zero_labels: true,
            max_concurrency: 8,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScoreFailure {
    pub query_id: String,
    pub doc_id: String,
    pub kind: String,
    pub message: String,
}

/// Scored pairs plus the pairs that could not be scored, both in input order.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RelabelOutcome {
    pub relabeled: Vec<PairRecord>,
    pub failures: Vec<ScoreFailure>,
}

impl RelabelOutcome {
    pub fn label_histogram(&self) -> [usize; 4] {
        let mut hist = [0; 4];
        for label in self.relabeled.iter().filter_map(|r| r.label) {
            hist[label.index()] += 1;
        }
        hist
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Stage1Report {
    pub n_unlabeled_in: usize,
    pub n_scored: usize,
    /// Every pair that failed to receive a label, whatever the cause; see
    /// `failures` for the kind.
    pub n_parse_failures: usize,
    pub label_histogram: [usize; 4],
    pub n_annotated_in: usize,
    pub n_zero_excluded: usize,
    pub n_duplicates_dropped: usize,
    pub n_merged_out: usize,
    pub failures: Vec<ScoreFailure>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Stage1Output {
    pub d2q: Vec<D2QGroup>,
    pub merged_corpus: Corpus,
    pub report: Stage1Report,
    pub decisions: Vec<FilterDecision>,
}

/// Scores every pair of `unlabeled`. Pairs whose document is unknown or whose
/// scoring fails are reported, never imputed.
pub fn relabel(unlabeled: &Corpus, docs: &DocumentTable, scorer: &dyn ScoreModel, max_concurrency: usize) -> RelabelOutcome {
    let results = run_batch(unlabeled.records(), max_concurrency, |r| {
        let doc = docs
            .get(&r.doc_id)
            .ok_or_else(|| ModelError::Precondition(format!("unknown document {:?}", r.doc_id)))?;
        score(scorer, &r.query, doc)
    });

    let mut out = RelabelOutcome::default();
    for (record, result) in unlabeled.iter().zip(results) {
        match result {
            Ok(judgment) => {
                let mut r = record.clone();
                r.label = Some(judgment.label);
                r.provenance = Provenance::Stage1Relabel;
                out.relabeled.push(r);
            }
            Err(e) => out.failures.push(ScoreFailure {
                query_id: record.query.query_id.clone(),
                doc_id: record.doc_id.clone(),
                kind: e.kind().to_string(),
                message: e.to_string(),
            }),
        }
    }
    out
}

/// One group per document in first-appearance order; within a group the
/// first occurrence of each normalized query wins. Unlabeled records are
/// skipped.
pub fn group_d2q(records: &[PairRecord]) -> Vec<D2QGroup> {
    let mut groups: IndexMap<&str, (Vec<D2QEntry>, HashSet<String>)> = IndexMap::new();
    for r in records {
        let Some(label) = r.label else { continue };
        let (entries, seen) = groups.entry(r.doc_id.as_str()).or_default();
        if seen.insert(r.query.normalized()) {
            entries.push(D2QEntry {
                query_id: r.query.query_id.clone(),
                query: r.query.text.clone(),
                label,
            });
        }
    }
    groups
        .into_iter()
        .map(|(doc_id, (entries, _))| D2QGroup {
            doc_id: doc_id.to_string(),
            entries,
        })
        .collect()
}

/// Annotated records first, all of them, then every relabeled record whose
/// (normalized query, doc_id) is not already present. Returns the merged
/// corpus and the relabeled records that lost.
pub fn merge_stage1(relabeled: &[PairRecord], labeled: &Corpus) -> (Corpus, Vec<PairRecord>) {
    let mut seen: HashSet<(String, String)> = labeled.iter().map(PairRecord::pair_key).collect();
    let mut merged = labeled.records().to_vec();
    let mut dropped = Vec::new();
    for r in relabeled {
        if seen.insert(r.pair_key()) {
            merged.push(r.clone());
        } else {
            dropped.push(r.clone());
        }
    }
    (Corpus::from_valid(merged), dropped)
}

/// Full Stage 1. `labeled` is deduplicated here (the operation is idempotent,
/// so pre-deduplicated input is fine).
pub fn run_stage1(labeled: &Corpus, unlabeled: &Corpus, docs: &DocumentTable, scorer: &dyn ScoreModel, options: Stage1Options) -> Stage1Output {
    let labeled = dedup_for_query_model(labeled);
    let outcome = relabel(unlabeled, docs, scorer, options.max_concurrency);
    let label_histogram = outcome.label_histogram();

    let mut decisions: Vec<FilterDecision> = outcome
        .failures
        .iter()
        .map(|f| {
            FilterDecision::new(f.query_id.clone(), f.doc_id.clone(), Verdict::DroppedScoringFailed).with_error(format!("{}: {}", f.kind, f.message))
        })
        .collect();

    let mut candidates = Vec::with_capacity(outcome.relabeled.len());
    let mut n_zero_excluded = 0;
    for r in outcome.relabeled {
        if !options.keep_zero_labels && r.label == Some(RelevanceLabel::ZERO) {
            n_zero_excluded += 1;
            decisions.push(FilterDecision::for_record(&r, Verdict::DroppedZeroLabel).with_predicted(RelevanceLabel::ZERO));
        } else {
            candidates.push(r);
        }
    }

    let d2q = group_d2q(&candidates);
    let (merged_corpus, dropped) = merge_stage1(&candidates, &labeled);
    decisions.extend(dropped.iter().map(|r| FilterDecision::for_record(r, Verdict::DroppedDuplicate)));

    let report = Stage1Report {
        n_unlabeled_in: unlabeled.len(),
        n_scored: unlabeled.len() - outcome.failures.len(),
        n_parse_failures: outcome.failures.len(),
        label_histogram,
        n_annotated_in: labeled.len(),
        n_zero_excluded,
        n_duplicates_dropped: dropped.len(),
        n_merged_out: merged_corpus.len(),
        failures: outcome.failures,
    };
    Stage1Output {
        d2q,
        merged_corpus,
        report,
        decisions,
    }
}
