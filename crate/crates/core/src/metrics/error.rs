use std::path::PathBuf;

#[derive(Debug, thiserror::Error)]
pub enum MetricError {
    #[error("k must be at least 1")]
    InvalidCutoff,
    #[error("query {0:?} appears in the run but not in the qrels")]
    QueryNotJudged(String),
    #[error("query {query_id:?}: document {doc_id:?} is not judged (strict mode)")]
    UnjudgedDocument { query_id: String, doc_id: String },
    #[error("query {query_id:?}: document {doc_id:?} appears twice in the run")]
    DuplicateRunEntry { query_id: String, doc_id: String },
    #[error("query {query_id:?}: document {doc_id:?} judged twice")]
    DuplicateJudgment { query_id: String, doc_id: String },
    #[error("threshold must be 1, 2 or 3 (got {0})")]
    InvalidThreshold(u8),
    #[error("no pairs with label >= {0}; average precision is undefined")]
    NoPositives(u8),
    #[error("score is not a finite number: {0}")]
    NonFiniteScore(f64),
    #[error("pair ({query_id:?}, {doc_id:?}) has a score but no label")]
    MissingLabel { query_id: String, doc_id: String },
    #[error("{}:{line}: {message}", path.display())]
    Parse { path: PathBuf, line: usize, message: String },
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}
