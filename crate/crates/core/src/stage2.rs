//! Stage 2: label-conditioned synthesis, score-based filtering, pairwise
//! consistency filtering and assembly of the enriched corpus.

use std::collections::HashSet;

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

pub use crate::audit::{DecisionDetail, FilterDecision, Verdict};
use crate::corpus::{Corpus, CorpusError, DocumentTable, PairRecord, Provenance, RelevanceLabel};
use crate::modelio::{generate_query, judge_order, run_batch, score, ModelError, OrderVerdict, PairwiseJudge, QueryModel, ScoreModel};

#[derive(Debug, thiserror::Error)]
pub enum Stage2Error {
    #[error("synthesis plan has no target labels")]
    NoTargetLabels,
    #[error("target label 0 cannot be synthesized")]
    ZeroTargetLabel,
    #[error("per_doc_per_label must be at least 1")]
    ZeroPerDoc,
    #[error("unknown document {0:?}")]
    UnknownDocument(String),
    #[error("record {query_id:?} has no target_label")]
    MissingTargetLabel { query_id: String },
    #[error("record {query_id:?} has no label")]
    MissingLabel { query_id: String },
    #[error(transparent)]
    Corpus(#[from] CorpusError),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SynthesisPlan {
    pub doc_ids: Vec<String>,
    pub target_labels: Vec<RelevanceLabel>,
    #[serde(default = "one")]
    pub per_doc_per_label: usize,
}

fn one() -> usize {
    1
}

impl SynthesisPlan {
    /// All three generatable labels, one query each.
    pub fn all_labels(doc_ids: Vec<String>) -> Self {
        SynthesisPlan {
            doc_ids,
            target_labels: vec![RelevanceLabel::ONE, RelevanceLabel::TWO, RelevanceLabel::THREE],
            per_doc_per_label: 1,
        }
    }

    pub fn validate(&self) -> Result<(), Stage2Error> {
        if self.target_labels.is_empty() {
            return Err(Stage2Error::NoTargetLabels);
        }
        if self.target_labels.contains(&RelevanceLabel::ZERO) {
            return Err(Stage2Error::ZeroTargetLabel);
        }
        if self.per_doc_per_label == 0 {
            return Err(Stage2Error::ZeroPerDoc);
        }
        Ok(())
    }

    pub fn n_slots(&self) -> usize {
        self.doc_ids.len() * self.target_labels.len() * self.per_doc_per_label
    }
}

/// Query id of a synthesis slot.
pub fn synthetic_query_id(doc_id: &str, label: RelevanceLabel, sample: usize) -> String {
    format!("syn:{doc_id}:{label}:{sample}")
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthesisOutput {
    pub corpus: Corpus,
    /// One entry per slot that produced no query.
    pub failures: Vec<FilterDecision>,
}

/// Generates one query per (document, target label, sample) slot, in that
/// nesting order. Records are `synthetic_raw` with label = target.
pub fn synthesize(
    plan: &SynthesisPlan,
    docs: &DocumentTable,
    generator: &dyn QueryModel,
    max_concurrency: usize,
) -> Result<SynthesisOutput, Stage2Error> {
    plan.validate()?;
    let mut slots = Vec::with_capacity(plan.n_slots());
    for doc_id in &plan.doc_ids {
        let doc = docs.get(doc_id).ok_or_else(|| Stage2Error::UnknownDocument(doc_id.clone()))?;
        for &label in &plan.target_labels {
            for sample in 0..plan.per_doc_per_label {
                slots.push((doc, label, sample));
            }
        }
    }

    let results = run_batch(&slots, max_concurrency, |&(doc, label, sample)| {
        generate_query(generator, doc, label, sample, synthetic_query_id(&doc.doc_id, label, sample))
    });

    let mut records = Vec::new();
    let mut failures = Vec::new();
    for (&(doc, label, sample), result) in slots.iter().zip(results) {
        match result {
            Ok(query) => records.push(
                PairRecord::labeled(query, doc.doc_id.clone(), label)
                    .with_provenance(Provenance::SyntheticRaw)
                    .with_target_label(label),
            ),
            Err(e) => {
                let mut d = FilterDecision::new(
                    synthetic_query_id(&doc.doc_id, label, sample),
                    doc.doc_id.clone(),
                    Verdict::DroppedGenerationFailed,
                )
                .with_error(e);
                d.detail.target_label = Some(label);
                failures.push(d);
            }
        }
    }
    Ok(SynthesisOutput {
        corpus: Corpus::new(records)?,
        failures,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct FilterOutput {
    pub kept: Corpus,
    pub decisions: Vec<FilterDecision>,
}

fn require_target(r: &PairRecord) -> Result<RelevanceLabel, Stage2Error> {
    r.target_label().ok_or_else(|| Stage2Error::MissingTargetLabel {
        query_id: r.query.query_id.clone(),
    })
}

/// Keeps a record iff the score model's label equals its target label. Kept
/// records become `synthetic_filtered` with label = target.
pub fn filter_by_score(corpus: &Corpus, docs: &DocumentTable, scorer: &dyn ScoreModel, max_concurrency: usize) -> Result<FilterOutput, Stage2Error> {
    let targets = corpus.iter().map(require_target).collect::<Result<Vec<_>, _>>()?;
    let results = run_batch(corpus.records(), max_concurrency, |r| {
        let doc = docs
            .get(&r.doc_id)
            .ok_or_else(|| ModelError::Precondition(format!("unknown document {:?}", r.doc_id)))?;
        score(scorer, &r.query, doc)
    });

    let mut kept = Vec::new();
    let mut decisions = Vec::with_capacity(corpus.len());
    for ((record, target), result) in corpus.iter().zip(targets).zip(results) {
        match result {
            Ok(j) if j.label == target => {
                let mut r = record.clone();
                r.label = Some(target);
                r.provenance = Provenance::SyntheticFiltered;
                decisions.push(FilterDecision::for_record(&r, Verdict::Kept).with_predicted(j.label));
                kept.push(r);
            }
            Ok(j) => decisions.push(FilterDecision::for_record(record, Verdict::DroppedScoreMismatch).with_predicted(j.label)),
            Err(e) => decisions.push(FilterDecision::for_record(record, Verdict::DroppedScoreMismatch).with_error(e)),
        }
    }
    Ok(FilterOutput {
        kept: Corpus::new(kept)?,
        decisions,
    })
}

/// One judged pair, presented with the lower-labeled query as A.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PairJudgment {
    pub doc_id: String,
    pub query_a_id: String,
    pub query_b_id: String,
    pub label_a: RelevanceLabel,
    pub label_b: RelevanceLabel,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub verdict: Option<OrderVerdict>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    pub consistent: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PairwiseOutput {
    pub refined: Corpus,
    /// One per synthetic input record.
    pub decisions: Vec<FilterDecision>,
    pub judgments: Vec<PairJudgment>,
}

/// Judges every label-discordant pair of synthetic queries within each
/// document. A pair is inconsistent when the judge prefers the lower-labeled
/// query or the judgment fails; both members of an inconsistent pair are
/// dropped. Non-synthetic records pass through untouched.
pub fn filter_pairwise(
    corpus: &Corpus,
    docs: &DocumentTable,
    judge: &dyn PairwiseJudge,
    max_concurrency: usize,
) -> Result<PairwiseOutput, Stage2Error> {
    let mut by_doc: IndexMap<&str, Vec<usize>> = IndexMap::new();
    for (i, r) in corpus.iter().enumerate() {
        if r.label.is_none() {
            return Err(Stage2Error::MissingLabel {
                query_id: r.query.query_id.clone(),
            });
        }
        if r.provenance.is_synthetic() {
            by_doc.entry(r.doc_id.as_str()).or_default().push(i);
        }
    }

    let records = corpus.records();
    let label = |i: usize| records[i].label.expect("checked above");
    let mut pairs = Vec::new();
    for members in by_doc.values() {
        for (x, &i) in members.iter().enumerate() {
            for &j in &members[x + 1..] {
                match label(i).cmp(&label(j)) {
                    std::cmp::Ordering::Less => pairs.push((i, j)),
                    std::cmp::Ordering::Greater => pairs.push((j, i)),
                    std::cmp::Ordering::Equal => {}
                }
            }
        }
    }

    let results = run_batch(&pairs, max_concurrency, |&(a, b)| {
        let doc = docs
            .get(&records[a].doc_id)
            .ok_or_else(|| ModelError::Precondition(format!("unknown document {:?}", records[a].doc_id)))?;
        judge_order(judge, doc, &records[a].query, &records[b].query)
    });

    // Per record: the first counterpart it lost to, with that pair's verdict or error.
    type Loss = (usize, Option<OrderVerdict>, Option<String>);
    let mut dropped_by: Vec<Option<Loss>> = vec![None; records.len()];
    let mut judgments = Vec::with_capacity(pairs.len());
    for (&(a, b), result) in pairs.iter().zip(results) {
        let (verdict, error) = match result {
            Ok(v) => (Some(v), None),
            Err(e) => (None, Some(e.to_string())),
        };
        let consistent = matches!(verdict, Some(OrderVerdict::BMoreRelevant | OrderVerdict::Tie));
        if !consistent {
            for (me, other) in [(a, b), (b, a)] {
                dropped_by[me].get_or_insert((other, verdict, error.clone()));
            }
        }
        judgments.push(PairJudgment {
            doc_id: records[a].doc_id.clone(),
            query_a_id: records[a].query.query_id.clone(),
            query_b_id: records[b].query.query_id.clone(),
            label_a: label(a),
            label_b: label(b),
            verdict,
            error,
            consistent,
        });
    }

    let mut refined = Vec::new();
    let mut decisions = Vec::new();
    for (i, r) in records.iter().enumerate() {
        if !r.provenance.is_synthetic() {
            refined.push(r.clone());
            continue;
        }
        match &dropped_by[i] {
            None => {
                decisions.push(FilterDecision::for_record(r, Verdict::Kept));
                refined.push(r.clone());
            }
            Some((other, verdict, error)) => {
                let mut d = FilterDecision::for_record(r, Verdict::DroppedPairwiseInconsistent)
                    .with_counterpart(records[*other].query.query_id.clone(), *verdict);
                d.detail.error = error.clone();
                decisions.push(d);
            }
        }
    }
    Ok(PairwiseOutput {
        refined: Corpus::new(refined)?,
        decisions,
        judgments,
    })
}

/// Stage-1 records first, then refined records whose (normalized query,
/// doc_id) is new. Returns the enriched corpus and the synthetic records that
/// lost to an existing pair.
pub fn assemble_enriched(refined: &Corpus, stage1: &Corpus) -> (Corpus, Vec<PairRecord>) {
    let mut seen: HashSet<(String, String)> = stage1.iter().map(PairRecord::pair_key).collect();
    let mut out = stage1.records().to_vec();
    let mut dropped = Vec::new();
    for r in refined {
        if seen.insert(r.pair_key()) {
            out.push(r.clone());
        } else {
            dropped.push(r.clone());
        }
    }
    (Corpus::new(out).expect("inputs were valid corpora"), dropped)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{assemble_document, Query};
    use crate::modelio::mock::{OverlapJudge, TableJudge, TableScorer, TemplateQueryGenerator};

    fn label(v: i64) -> RelevanceLabel {
        RelevanceLabel::new(v).unwrap()
    }

    fn docs(n: usize) -> DocumentTable {
        let mut t = DocumentTable::new();
        for i in 0..n {
            t.insert(assemble_document(format!("d{i}"), format!("title {i}"), Some("ocr"), Some("asr"), None).unwrap())
                .unwrap();
        }
        t
    }

    fn syn(qid: &str, text: &str, doc: &str, l: i64) -> PairRecord {
        PairRecord::labeled(Query::new(qid, text).unwrap(), doc, label(l))
            .with_provenance(Provenance::SyntheticFiltered)
            .with_target_label(label(l))
    }

    #[test]
    fn plan_validation() {
        let mut plan = SynthesisPlan::all_labels(vec!["d0".into()]);
        assert!(plan.validate().is_ok());
        plan.per_doc_per_label = 0;
        assert!(matches!(plan.validate(), Err(Stage2Error::ZeroPerDoc)));
        plan.per_doc_per_label = 1;
        plan.target_labels = vec![];
        assert!(matches!(plan.validate(), Err(Stage2Error::NoTargetLabels)));
        plan.target_labels = vec![RelevanceLabel::ZERO];
        assert!(matches!(plan.validate(), Err(Stage2Error::ZeroTargetLabel)));
    }

    #[test]
    fn synthesize_two_docs_three_labels() {
        let plan = SynthesisPlan::all_labels(vec!["d0".into(), "d1".into()]);
        let out = synthesize(&plan, &docs(2), &TemplateQueryGenerator, 4).unwrap();
        assert_eq!(out.corpus.len(), 6);
        assert!(out.failures.is_empty());
        let first = &out.corpus.records()[0];
        assert_eq!(first.query.query_id, "syn:d0:1:0");
        assert_eq!(first.query.text, "mock-q(d0,1)");
        assert_eq!(first.provenance, Provenance::SyntheticRaw);
        assert_eq!(first.target_label(), Some(label(1)));
        assert_eq!(synthesize(&plan, &docs(2), &TemplateQueryGenerator, 1).unwrap(), out);
    }

    #[test]
    fn synthesize_unknown_doc() {
        let plan = SynthesisPlan::all_labels(vec!["nope".into()]);
        assert!(matches!(
            synthesize(&plan, &docs(1), &TemplateQueryGenerator, 1),
            Err(Stage2Error::UnknownDocument(_))
        ));
    }

    #[test]
    fn score_filter_constant_three_keeps_a_third() {
        let records: Vec<_> = (0..30)
            .map(|i| syn(&format!("s{i}"), &format!("query {i}"), "d0", (i % 3 + 1) as i64))
            .collect();
        let corpus = Corpus::new(records).unwrap();
        let scorer = TableScorer::new().with_fallback(RelevanceLabel::THREE);
        let out = filter_by_score(&corpus, &docs(1), &scorer, 4).unwrap();
        assert_eq!(out.kept.len(), 10);
        assert_eq!(out.decisions.len(), 30);
        assert!(out.kept.iter().all(|r| r.label == r.target_label()));

        let empty = filter_by_score(&Corpus::default(), &docs(1), &scorer, 4).unwrap();
        assert!(empty.kept.is_empty() && empty.decisions.is_empty());
    }

    fn three_level_doc() -> Corpus {
        Corpus::new(vec![syn("s1", "low", "d0", 1), syn("s2", "mid", "d0", 2), syn("s3", "high", "d0", 3)]).unwrap()
    }

    fn true_order_judge() -> TableJudge {
        TableJudge::new().with("d0", "low", 1.0).with("d0", "mid", 2.0).with("d0", "high", 3.0)
    }

    #[test]
    fn pairwise_consistent_keeps_all() {
        let out = filter_pairwise(&three_level_doc(), &docs(1), &true_order_judge(), 2).unwrap();
        assert_eq!(out.refined.len(), 3);
        assert_eq!(out.judgments.len(), 3);
        assert!(out.judgments.iter().all(|j| j.label_a < j.label_b));
    }

    #[test]
    fn pairwise_single_inversion_drops_both_members() {
        let judge = true_order_judge().inverting("d0", "low", "high");
        let out = filter_pairwise(&three_level_doc(), &docs(1), &judge, 2).unwrap();
        let kept: Vec<_> = out.refined.iter().map(|r| r.query.query_id.as_str()).collect();
        assert_eq!(kept, ["s2"]);
        let s1 = &out.decisions[0];
        assert_eq!(s1.verdict, Verdict::DroppedPairwiseInconsistent);
        assert_eq!(s1.detail.counterpart_query_id.as_deref(), Some("s3"));
        assert_eq!(s1.detail.verdict_token.as_deref(), Some("A"));
    }

    #[test]
    fn pairwise_judge_failure_is_inconsistent() {
        let judge = true_order_judge().failing("d0", "mid", "high");
        let out = filter_pairwise(&three_level_doc(), &docs(1), &judge, 2).unwrap();
        assert_eq!(out.refined.len(), 1);
        assert!(out.decisions[1].detail.error.is_some());
    }

    #[test]
    fn pairwise_singleton_and_ties() {
        let single = Corpus::new(vec![syn("s1", "only", "d0", 2)]).unwrap();
        let out = filter_pairwise(&single, &docs(1), &OverlapJudge::new(0, 0.0), 1).unwrap();
        assert_eq!(out.refined.len(), 1);
        assert!(out.judgments.is_empty());

        let tie = TableJudge::new().with("d0", "a", 1.0).with("d0", "b", 1.0);
        let pair = Corpus::new(vec![syn("s1", "a", "d0", 1), syn("s2", "b", "d0", 3)]).unwrap();
        let out = filter_pairwise(&pair, &docs(1), &tie, 1).unwrap();
        assert_eq!(out.refined.len(), 2);
        assert_eq!(out.judgments[0].verdict, Some(OrderVerdict::Tie));
    }

    #[test]
    fn assemble_policy() {
        let stage1: Vec<_> = (0..100)
            .map(|i| PairRecord::labeled(Query::new(format!("a{i}"), format!("ann {i}")).unwrap(), "d0", label(2)))
            .collect();
        let stage1 = Corpus::new(stage1).unwrap();
        let refined: Vec<_> = (0..50).map(|i| syn(&format!("s{i}"), &format!("syn {i}"), "d0", 1)).collect();
        let refined = Corpus::new(refined).unwrap();
        assert_eq!(assemble_enriched(&refined, &stage1).0.len(), 150);

        let dup = Corpus::new(vec![syn("s0", "ANN 7", "d0", 3)]).unwrap();
        let (out, dropped) = assemble_enriched(&dup, &stage1);
        assert_eq!(out.len(), 100);
        assert_eq!(dropped[0].query.query_id, "s0");

        assert_eq!(assemble_enriched(&Corpus::default(), &stage1).0, stage1);
    }
}
