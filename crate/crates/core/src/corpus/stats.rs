use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use super::text::LengthUnit;
use super::{Corpus, DocumentTable};
use crate::util::round_half_even;

/// Size, label distribution and length statistics of a corpus.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusStats {
    pub size: usize,
    pub label_counts: [usize; 4],
    /// Percent per label over labeled records; `None` when there are none.
    pub label_proportions: Option<[f64; 4]>,
    pub n_queries: usize,
    pub n_docs: usize,
    pub avg_query_len: Option<f64>,
    /// Mean rendered-document length over records whose document is known.
    pub avg_doc_len: Option<f64>,
    pub length_unit: LengthUnit,
}

impl CorpusStats {
    /// Proportions rounded to two decimals, ties to even.
    pub fn rounded_proportions(&self) -> Option<[f64; 4]> {
        self.label_proportions.map(|p| p.map(|v| round_half_even(v, 2)))
    }
}

pub fn compute_stats(corpus: &Corpus, docs: Option<&DocumentTable>, unit: LengthUnit) -> CorpusStats {
    let label_counts = corpus.label_counts();
    let labeled: usize = label_counts.iter().sum();
    let label_proportions = (labeled > 0).then(|| label_counts.map(|c| 100.0 * c as f64 / labeled as f64));

    let mut queries = HashSet::new();
    let mut doc_ids = HashSet::new();
    let mut query_len_total = 0usize;
    let mut doc_len_total = 0usize;
    let mut doc_len_n = 0usize;
    for record in corpus {
        queries.insert(record.query.normalized());
        doc_ids.insert(record.doc_id.as_str());
        query_len_total += unit.measure(&record.query.text);
        if let Some(doc) = docs.and_then(|t| t.get(&record.doc_id)) {
            doc_len_total += unit.measure(&doc.render());
            doc_len_n += 1;
        }
    }
    let mean = |total: usize, n: usize| (n > 0).then(|| total as f64 / n as f64);

    CorpusStats {
        size: corpus.len(),
        label_counts,
        label_proportions,
        n_queries: queries.len(),
        n_docs: doc_ids.len(),
        avg_query_len: mean(query_len_total, corpus.len()),
        avg_doc_len: mean(doc_len_total, doc_len_n),
        length_unit: unit,
    }
}
