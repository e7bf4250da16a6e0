use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::text::normalize_query;
use super::{CorpusError, RelevanceLabel};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Query {
    pub query_id: String,
    pub text: String,
}

impl Query {
    pub fn new(query_id: impl Into<String>, text: impl Into<String>) -> Result<Self, CorpusError> {
        let query = Query {
            query_id: query_id.into(),
            text: text.into(),
        };
        query.validate()?;
        Ok(query)
    }

    pub fn validate(&self) -> Result<(), CorpusError> {
        if self.query_id.is_empty() {
            return Err(CorpusError::EmptyField("query_id"));
        }
        if self.normalized().is_empty() {
            return Err(CorpusError::EmptyQuery {
                query_id: self.query_id.clone(),
            });
        }
        Ok(())
    }

    pub fn normalized(&self) -> String {
        normalize_query(&self.text)
    }
}

/// Where a record came from.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    #[default]
    Annotated,
    Stage1Relabel,
    SyntheticRaw,
    SyntheticFiltered,
}

impl Provenance {
    pub fn is_synthetic(self) -> bool {
        matches!(self, Provenance::SyntheticRaw | Provenance::SyntheticFiltered)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Provenance::Annotated => "annotated",
            Provenance::Stage1Relabel => "stage1_relabel",
            Provenance::SyntheticRaw => "synthetic_raw",
            Provenance::SyntheticFiltered => "synthetic_filtered",
        }
    }
}

impl fmt::Display for Provenance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

pub const META_TARGET_LABEL: &str = "target_label";

/// One (query, document, label, provenance) pair: the corpus atom.
#[derive(Debug, Clone, PartialEq)]
pub struct PairRecord {
    pub query: Query,
    pub doc_id: String,
    pub label: Option<RelevanceLabel>,
    pub provenance: Provenance,
    pub meta: BTreeMap<String, Value>,
}

impl PairRecord {
    pub fn labeled(query: Query, doc_id: impl Into<String>, label: RelevanceLabel) -> Self {
        PairRecord {
            query,
            doc_id: doc_id.into(),
            label: Some(label),
            provenance: Provenance::Annotated,
            meta: BTreeMap::new(),
        }
    }

    pub fn unlabeled(query: Query, doc_id: impl Into<String>) -> Self {
        PairRecord {
            query,
            doc_id: doc_id.into(),
            label: None,
            provenance: Provenance::Annotated,
            meta: BTreeMap::new(),
        }
    }

    pub fn with_provenance(mut self, provenance: Provenance) -> Self {
        self.provenance = provenance;
        self
    }

    pub fn with_target_label(mut self, target: RelevanceLabel) -> Self {
        self.meta.insert(META_TARGET_LABEL.to_string(), Value::from(target.value()));
        self
    }

    /// `meta.target_label`, if present and a valid label.
    pub fn target_label(&self) -> Option<RelevanceLabel> {
        self.meta
            .get(META_TARGET_LABEL)
            .and_then(Value::as_i64)
            .and_then(|v| RelevanceLabel::new(v).ok())
    }

    /// Key used for cross-set duplicate detection.
    pub fn pair_key(&self) -> (String, String) {
        (self.query.normalized(), self.doc_id.clone())
    }

    pub fn validate(&self) -> Result<(), CorpusError> {
        self.query.validate()?;
        if self.doc_id.is_empty() {
            return Err(CorpusError::EmptyField("doc_id"));
        }
        if self.provenance != Provenance::Annotated && self.label.is_none() {
            return Err(CorpusError::MissingLabel {
                query_id: self.query.query_id.clone(),
                provenance: self.provenance.to_string(),
            });
        }
        if self.provenance.is_synthetic() && !matches!(self.target_label(), Some(t) if t != RelevanceLabel::ZERO) {
            return Err(CorpusError::MissingTargetLabel {
                query_id: self.query.query_id.clone(),
            });
        }
        Ok(())
    }
}

/// Flat on-disk form of [`PairRecord`].
#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub(crate) struct RecordLine {
    pub query_id: String,
    pub query: String,
    pub doc_id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<RelevanceLabel>,
    #[serde(default)]
    pub provenance: Provenance,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub meta: BTreeMap<String, Value>,
}

impl From<&PairRecord> for RecordLine {
    fn from(r: &PairRecord) -> Self {
        RecordLine {
            query_id: r.query.query_id.clone(),
            query: r.query.text.clone(),
            doc_id: r.doc_id.clone(),
            label: r.label,
            provenance: r.provenance,
            meta: r.meta.clone(),
        }
    }
}

impl From<RecordLine> for PairRecord {
    fn from(line: RecordLine) -> Self {
        PairRecord {
            query: Query {
                query_id: line.query_id,
                text: line.query,
            },
            doc_id: line.doc_id,
            label: line.label,
            provenance: line.provenance,
            meta: line.meta,
        }
    }
}

/// An ordered list of validated records.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Corpus {
    records: Vec<PairRecord>,
}

impl Corpus {
    pub fn new(records: Vec<PairRecord>) -> Result<Self, CorpusError> {
        for r in &records {
            r.validate()?;
        }
        Ok(Corpus { records })
    }

    /// Builds a corpus from records already known to be valid.
    pub(crate) fn from_valid(records: Vec<PairRecord>) -> Self {
        debug_assert!(records.iter().all(|r| r.validate().is_ok()));
        Corpus { records }
    }

    pub fn records(&self) -> &[PairRecord] {
        &self.records
    }

    pub fn into_records(self) -> Vec<PairRecord> {
        self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn iter(&self) -> std::slice::Iter<'_, PairRecord> {
        self.records.iter()
    }

    /// Counts per label; unlabeled records are not counted.
    pub fn label_counts(&self) -> [usize; 4] {
        let mut counts = [0usize; 4];
        for label in self.records.iter().filter_map(|r| r.label) {
            counts[label.index()] += 1;
        }
        counts
    }
}

impl<'a> IntoIterator for &'a Corpus {
    type Item = &'a PairRecord;
    type IntoIter = std::slice::Iter<'a, PairRecord>;

    fn into_iter(self) -> Self::IntoIter {
        self.records.iter()
    }
}

/// One document with the queries attached to it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct D2QGroup {
    pub doc_id: String,
    pub entries: Vec<D2QEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct D2QEntry {
    pub query_id: String,
    pub query: String,
    pub label: RelevanceLabel,
}

#[cfg(test)]
mod tests {
    use super::*;

    fn q(text: &str) -> Query {
        Query::new("q", text).unwrap()
    }

    #[test]
    fn blank_queries_are_rejected() {
        assert!(matches!(Query::new("q1", " \t "), Err(CorpusError::EmptyQuery { .. })));
        assert!(Query::new("", "x").is_err());
    }

    #[test]
    fn derived_provenance_requires_label() {
        let rec = PairRecord::unlabeled(q("a"), "d1").with_provenance(Provenance::Stage1Relabel);
        assert!(matches!(rec.validate(), Err(CorpusError::MissingLabel { .. })));
    }

    #[test]
    fn synthetic_requires_positive_target() {
        let base = PairRecord::labeled(q("a"), "d1", RelevanceLabel::TWO).with_provenance(Provenance::SyntheticRaw);
        assert!(base.validate().is_err());
        assert!(base.clone().with_target_label(RelevanceLabel::ZERO).validate().is_err());
        let ok = base.with_target_label(RelevanceLabel::TWO);
        ok.validate().unwrap();
        assert_eq!(ok.target_label(), Some(RelevanceLabel::TWO));
    }
}
