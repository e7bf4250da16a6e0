//! Deduplication and subset construction.

use std::collections::HashSet;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{Corpus, CorpusError, PairRecord, RelevanceLabel};

/// Keeps the first record for each (normalized query, label); order preserved.
pub fn dedup_for_query_model(corpus: &Corpus) -> Corpus {
    partition_dedup(corpus).0
}

/// [`dedup_for_query_model`] that also returns the records it removed.
pub fn partition_dedup(corpus: &Corpus) -> (Corpus, Vec<PairRecord>) {
    let mut seen = HashSet::new();
    let (kept, dropped): (Vec<_>, Vec<_>) = corpus.iter().cloned().partition(|r| seen.insert((r.query.normalized(), r.label)));
    (Corpus::from_valid(kept), dropped)
}

/// Records labeled 0 or 3 only.
pub fn make_binary_subset(corpus: &Corpus) -> Corpus {
    let kept = corpus
        .iter()
        .filter(|r| matches!(r.label, Some(l) if l == RelevanceLabel::ZERO || l == RelevanceLabel::THREE))
        .cloned()
        .collect();
    Corpus::from_valid(kept)
}

/// Samples exactly `n_per_label` records of every label without replacement.
///
/// Selection is a pure function of `(corpus, n_per_label, seed)`; the output
/// keeps the input order of the chosen records.
pub fn make_balanced_testset(corpus: &Corpus, n_per_label: usize, seed: u64) -> Result<Corpus, CorpusError> {
    let mut by_label: [Vec<usize>; 4] = Default::default();
    for (idx, record) in corpus.iter().enumerate() {
        if let Some(label) = record.label {
            by_label[label.index()].push(idx);
        }
    }
    for label in RelevanceLabel::ALL {
        let available = by_label[label.index()].len();
        if available < n_per_label {
            return Err(CorpusError::InsufficientRecords {
                label,
                available,
                required: n_per_label,
            });
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut chosen: Vec<usize> = Vec::with_capacity(4 * n_per_label);
    for pool in &by_label {
        let picks = rand::seq::index::sample(&mut rng, pool.len(), n_per_label);
        chosen.extend(picks.iter().map(|i| pool[i]));
    }
    chosen.sort_unstable();
    let records: Vec<PairRecord> = chosen.into_iter().map(|i| corpus.records()[i].clone()).collect();
    Ok(Corpus::from_valid(records))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::Query;

    fn rec(id: &str, q: &str, d: &str, l: i64) -> PairRecord {
        PairRecord::labeled(Query::new(id, q).unwrap(), d, RelevanceLabel::new(l).unwrap())
    }

    fn corpus(records: Vec<PairRecord>) -> Corpus {
        Corpus::new(records).unwrap()
    }

    #[test]
    fn same_query_same_label_collapses() {
        let c = corpus((0..5).map(|i| rec(&format!("q{i}"), "cat", &format!("d{i}"), 3)).collect());
        let out = dedup_for_query_model(&c);
        assert_eq!(out.len(), 1);
        assert_eq!(out.records()[0].doc_id, "d0");
    }

    #[test]
    fn same_query_distinct_labels_both_kept() {
        let c = corpus(vec![rec("a", "cat", "d1", 3), rec("b", " Cat ", "d2", 1), rec("c", "cat", "d3", 1)]);
        let out = dedup_for_query_model(&c);
        let ids: Vec<_> = out.iter().map(|r| r.query.query_id.as_str()).collect();
        assert_eq!(ids, ["a", "b"]);
        assert_eq!(dedup_for_query_model(&out), out);
    }

    #[test]
    fn binary_subset_counts() {
        let mut records = Vec::new();
        for (label, n) in [(0, 10), (1, 5), (2, 5), (3, 10)] {
            for i in 0..n {
                records.push(rec(&format!("q{label}-{i}"), &format!("q{label}-{i}"), "d", label));
            }
        }
        let out = make_binary_subset(&corpus(records));
        assert_eq!(out.label_counts(), [10, 0, 0, 10]);
    }

    #[test]
    fn balanced_one_per_label_returns_everything() {
        let c = corpus((0..4).map(|l| rec(&format!("q{l}"), &format!("q{l}"), "d", l)).collect());
        assert_eq!(make_balanced_testset(&c, 1, 42).unwrap(), c);
    }

    #[test]
    fn balanced_shortfall_names_label() {
        let c = corpus(vec![
            rec("a", "a", "d", 0),
            rec("b", "b", "d", 1),
            rec("c", "c", "d", 3),
            rec("e", "e", "d", 3),
        ]);
        let err = make_balanced_testset(&c, 1, 0).unwrap_err();
        match err {
            CorpusError::InsufficientRecords { label, available, required } => {
                assert_eq!((label, available, required), (RelevanceLabel::TWO, 0, 1));
            }
            other => panic!("unexpected {other}"),
        }
        assert!(make_balanced_testset(&c, 1, 0)
            .unwrap_err()
            .to_string()
            .contains("label 2: need 1 records, have 0 (short by 1)"));
    }
}
