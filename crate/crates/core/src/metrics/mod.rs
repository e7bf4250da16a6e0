//! Graded-relevance evaluation.
//!
//! nDCG@k for rankings, average precision at a label threshold for pair
//! classification, exact-match duplicate rates for synthetic queries and
//! target/judged label consistency.

mod ap;
mod consistency;
mod diversity;
mod error;
mod ndcg;
mod trec;

pub use ap::{average_precision_at_threshold, pair_classification, ApResult, PairClassificationReport};
pub use consistency::{consistency_rate, relative_improvement, ConsistencyReport, ConsistencyRow, MatchCount};
pub use diversity::{duplicate_rate, relative_decrease_exact_pct, relative_decrease_pct, DiversityReport};
pub use error::MetricError;
pub use ndcg::{dcg, ideal_dcg, ndcg_at_k, Gain, NdcgOptions, NdcgResult, UnjudgedPolicy, ZeroQueryPolicy};
pub use trec::{Qrels, RunRanking};

/// Version tag written into every JSON report.
pub const REPORT_SCHEMA_VERSION: u32 = 1;
