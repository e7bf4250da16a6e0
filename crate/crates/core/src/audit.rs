//! Per-record audit entries written as `decisions.jsonl` by every stage that
//! drops records.

use serde::{Deserialize, Serialize};

use crate::corpus::{PairRecord, RelevanceLabel};
use crate::modelio::OrderVerdict;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Kept,
    DroppedScoreMismatch,
    DroppedPairwiseInconsistent,
    /// Lost a cross-set or within-set duplicate resolution.
    DroppedDuplicate,
    /// Score model returned 0 and zero-labeled pairs are excluded.
    DroppedZeroLabel,
    /// Scoring failed; the pair never received a label.
    DroppedScoringFailed,
    /// Generation failed for a synthesis slot.
    DroppedGenerationFailed,
}

impl Verdict {
    pub fn is_drop(self) -> bool {
        self != Verdict::Kept
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DecisionDetail {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target_label: Option<RelevanceLabel>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub predicted_label: Option<RelevanceLabel>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub counterpart_query_id: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub verdict_token: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

/// One decision about one record.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FilterDecision {
    pub query_id: String,
    pub doc_id: String,
    pub verdict: Verdict,
    #[serde(default)]
    pub detail: DecisionDetail,
}

impl FilterDecision {
    pub fn new(query_id: impl Into<String>, doc_id: impl Into<String>, verdict: Verdict) -> Self {
        FilterDecision {
            query_id: query_id.into(),
            doc_id: doc_id.into(),
            verdict,
            detail: DecisionDetail::default(),
        }
    }

    pub fn for_record(record: &PairRecord, verdict: Verdict) -> Self {
        let mut d = Self::new(record.query.query_id.clone(), record.doc_id.clone(), verdict);
        d.detail.target_label = record.target_label();
        d
    }

    pub fn with_predicted(mut self, label: RelevanceLabel) -> Self {
        self.detail.predicted_label = Some(label);
        self
    }

    pub fn with_counterpart(mut self, query_id: impl Into<String>, verdict: Option<OrderVerdict>) -> Self {
        self.detail.counterpart_query_id = Some(query_id.into());
        self.detail.verdict_token = verdict.map(|v| v.token().to_string());
        self
    }

    pub fn with_error(mut self, error: impl ToString) -> Self {
        self.detail.error = Some(error.to_string());
        self
    }
}
