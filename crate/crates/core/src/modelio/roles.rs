//! Model role contracts and the checked operations built on them.
//!
//! Backends implement the traits; pipeline code calls the free functions,
//! which enforce the pre- and postconditions of each role.

use super::grammar::{OrderVerdict, ScoreJudgment};
use super::ModelError;
use crate::corpus::{Document, Query, RelevanceLabel};

/// Predicts a relevance label for a (query, document) pair.
pub trait ScoreModel: Send + Sync {
    fn score(&self, query: &Query, doc: &Document) -> Result<ScoreJudgment, ModelError>;
}

/// Generates a query for a document at a target relevance.
///
/// `sample` distinguishes repeated draws for the same (document, target).
pub trait QueryModel: Send + Sync {
    fn generate(&self, doc: &Document, target: RelevanceLabel, sample: usize) -> Result<String, ModelError>;
}

/// Decides which of two queries a document is more relevant to.
pub trait PairwiseJudge: Send + Sync {
    fn judge(&self, doc: &Document, query_a: &Query, query_b: &Query) -> Result<OrderVerdict, ModelError>;
}

/// Rewrites raw OCR/ASR text; `Ok(None)` means the model declined.
pub trait Rewriter: Send + Sync {
    fn rewrite(&self, ocr: &str, asr: &str) -> Result<Option<String>, ModelError>;
}

/// Explains why a pair carries a given label.
pub trait ReasoningModel: Send + Sync {
    fn explain(&self, query: &Query, doc: &Document, label: RelevanceLabel) -> Result<String, ModelError>;
}

pub fn score(model: &dyn ScoreModel, query: &Query, doc: &Document) -> Result<ScoreJudgment, ModelError> {
    if query.normalized().is_empty() {
        return Err(ModelError::Precondition("empty query text".into()));
    }
    if doc.body.trim().is_empty() {
        return Err(ModelError::Precondition(format!("document {:?} has an empty body", doc.doc_id)));
    }
    model.score(query, doc)
}

pub fn generate_query(
    model: &dyn QueryModel,
    doc: &Document,
    target: RelevanceLabel,
    sample: usize,
    query_id: impl Into<String>,
) -> Result<Query, ModelError> {
    if target == RelevanceLabel::ZERO {
        return Err(ModelError::Precondition(
            "target label 0 is not generated; label-0 pairs come from in-batch negatives".into(),
        ));
    }
    if doc.body.trim().is_empty() {
        return Err(ModelError::Precondition(format!("document {:?} has an empty body", doc.doc_id)));
    }
    let text = model.generate(doc, target, sample)?;
    Query::new(query_id, text.clone()).map_err(|_| ModelError::Generation { raw: text })
}

pub fn judge_order(judge: &dyn PairwiseJudge, doc: &Document, query_a: &Query, query_b: &Query) -> Result<OrderVerdict, ModelError> {
    if query_a.normalized() == query_b.normalized() {
        return Err(ModelError::Precondition("judged queries are identical".into()));
    }
    judge.judge(doc, query_a, query_b)
}

pub fn rewrite_item(rewriter: &dyn Rewriter, ocr: &str, asr: &str) -> Result<Option<String>, ModelError> {
    if ocr.trim().is_empty() && asr.trim().is_empty() {
        return Err(ModelError::Precondition("ocr and asr are both empty".into()));
    }
    rewriter.rewrite(ocr, asr)
}
