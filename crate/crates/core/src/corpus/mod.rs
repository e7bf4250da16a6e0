//! Record model, persistence, statistics and subsets.

mod document;
mod error;
pub mod io;
mod label;
mod record;
mod stats;
mod subset;
pub mod text;

pub use document::{assemble_document, fallback_body, Document, DocumentTable, RawItem};
pub use error::CorpusError;
pub use io::{load_corpus, load_documents, save_corpus, save_documents, Schema};
pub use label::RelevanceLabel;
pub use record::{Corpus, D2QEntry, D2QGroup, PairRecord, Provenance, Query, META_TARGET_LABEL};
pub use stats::{compute_stats, CorpusStats};
pub use subset::{dedup_for_query_model, make_balanced_testset, make_binary_subset, partition_dedup};
pub use text::{normalize_query, LengthUnit};
