use std::path::PathBuf;

use super::RelevanceLabel;

#[derive(Debug, thiserror::Error)]
pub enum CorpusError {
    #[error("label out of range: {0} (expected 0..=3)")]
    LabelOutOfRange(i64),
    #[error("invalid label {0:?}")]
    InvalidLabel(String),
    #[error("empty query text (query_id {query_id:?})")]
    EmptyQuery { query_id: String },
    #[error("empty {0}")]
    EmptyField(&'static str),
    #[error("record {query_id:?} with provenance {provenance} has no label")]
    MissingLabel { query_id: String, provenance: String },
    #[error("synthetic record {query_id:?} needs meta.target_label in 1..=3")]
    MissingTargetLabel { query_id: String },
    #[error("record {query_id:?} carries a label but the corpus schema is unlabeled")]
    UnexpectedLabel { query_id: String },
    #[error("duplicate doc_id {doc_id:?} with conflicting content")]
    ConflictingDocument { doc_id: String },
    #[error("document {doc_id:?}: ocr, asr and rewritten text are all empty")]
    EmptyDocumentSources { doc_id: String },
    #[error("label {label}: need {required} records, have {available} (short by {})", required - available)]
    InsufficientRecords {
        label: RelevanceLabel,
        available: usize,
        required: usize,
    },
    #[error("line {line}: {source}")]
    Line {
        line: usize,
        #[source]
        source: Box<CorpusError>,
    },
    #[error("malformed record: {0}")]
    Json(#[from] serde_json::Error),
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl CorpusError {
    pub(crate) fn at_line(self, line: usize) -> Self {
        CorpusError::Line {
            line,
            source: Box::new(self),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CorpusError::Io { path: path.into(), source }
    }
}
