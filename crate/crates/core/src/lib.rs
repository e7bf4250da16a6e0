//! Relevance-aware synthetic query pipeline.
//!
//! The crate is organised around the data flow of the pipeline:
//!
//! * [`corpus`] holds the record model, JSONL persistence, statistics and
//!   subset construction.
//! * [`modelio`] defines the score / query / judge / rewrite model roles, the
//!   chat-completions wire client, deterministic mocks and the batch executor.
//! * [`stage1`] re-annotates unlabeled pairs and builds the D2Q training corpus.
//! * [`stage2`] synthesizes label-conditioned queries and filters them.
//! * [`metrics`] evaluates rankings, pair classification and synthetic output.
//! * [`loss`] is the label-weighted InfoNCE reference with analytic gradients.
//! * [`pipeline`] binds everything into resumable, digest-checked CLI stages.

pub mod audit;
pub mod corpus;
pub mod loss;
pub mod metrics;
pub mod modelio;
pub mod pipeline;
pub mod stage1;
pub mod stage2;
pub mod util;

pub use corpus::{Corpus, Document, DocumentTable, PairRecord, Provenance, Query, RelevanceLabel};
