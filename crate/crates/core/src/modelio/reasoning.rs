//! Collection of relevance rationales for labeled pairs.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::batch::run_batch;
use super::roles::ReasoningModel;
use super::ModelError;
use crate::corpus::io::{read_jsonl_file, write_jsonl_file};
use crate::corpus::{CorpusError, Document, Query, RelevanceLabel};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReasoningRecord {
    pub query_id: String,
    pub query: String,
    pub doc_id: String,
    pub label: RelevanceLabel,
    pub rationale: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReasoningFailure {
    pub query_id: String,
    pub doc_id: String,
    pub kind: String,
    pub message: String,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ReasoningChains {
    pub records: Vec<ReasoningRecord>,
    pub failures: Vec<ReasoningFailure>,
}

impl ReasoningChains {
    pub fn save(&self, path: &Path) -> Result<(), CorpusError> {
        write_jsonl_file(path, &self.records)
    }

    pub fn load(path: &Path) -> Result<Vec<ReasoningRecord>, CorpusError> {
        read_jsonl_file(path)
    }
}

/// Asks `model` for a rationale per (query, document, label). Blank
/// rationales count as failures; order follows the input.
pub fn collect_reasoning_chains(model: &dyn ReasoningModel, items: &[(Query, &Document, RelevanceLabel)], max_concurrency: usize) -> ReasoningChains {
    let results = run_batch(items, max_concurrency, |(q, d, label)| {
        let text = model.explain(q, d, *label)?;
        if text.trim().is_empty() {
            return Err(ModelError::Generation { raw: text });
        }
        Ok(text.trim().to_string())
    });
    let mut out = ReasoningChains::default();
    for ((q, d, label), result) in items.iter().zip(results) {
        match result {
            Ok(rationale) => out.records.push(ReasoningRecord {
                query_id: q.query_id.clone(),
                query: q.text.clone(),
                doc_id: d.doc_id.clone(),
                label: *label,
                rationale,
            }),
            Err(e) => out.failures.push(ReasoningFailure {
                query_id: q.query_id.clone(),
                doc_id: d.doc_id.clone(),
                kind: e.kind().to_string(),
                message: e.to_string(),
            }),
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::assemble_document;
    use crate::modelio::mock::MockReasoner;

    #[test]
    fn failures_are_partitioned_and_saved_round_trip() {
        let d = assemble_document("d1", "cat video", Some("cat"), None, None).unwrap();
        let items = vec![
            (Query::new("q1", "cat").unwrap(), &d, RelevanceLabel::THREE),
            (Query::new("q2", "dog").unwrap(), &d, RelevanceLabel::ZERO),
            (Query::new("q3", "cat video").unwrap(), &d, RelevanceLabel::THREE),
        ];
        let chains = collect_reasoning_chains(&MockReasoner::new().failing_on("q2"), &items, 2);
        assert_eq!(chains.records.iter().map(|r| r.query_id.as_str()).collect::<Vec<_>>(), ["q1", "q3"]);
        assert_eq!(chains.failures.len(), 1);
        assert_eq!(chains.failures[0].query_id, "q2");

        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("chains.jsonl");
        chains.save(&path).unwrap();
        assert_eq!(ReasoningChains::load(&path).unwrap(), chains.records);
    }
}
