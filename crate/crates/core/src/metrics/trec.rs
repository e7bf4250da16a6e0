//! Qrels and run tables with their TSV forms.

use std::collections::BTreeMap;
use std::path::Path;

use super::MetricError;
use crate::corpus::RelevanceLabel;

/// Graded judgments: query id -> document id -> label.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Qrels {
    judgments: BTreeMap<String, BTreeMap<String, RelevanceLabel>>,
}

impl Qrels {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, query_id: &str, doc_id: &str, label: RelevanceLabel) -> Result<(), MetricError> {
        let docs = self.judgments.entry(query_id.to_string()).or_default();
        if docs.insert(doc_id.to_string(), label).is_some() {
            return Err(MetricError::DuplicateJudgment {
                query_id: query_id.to_string(),
                doc_id: doc_id.to_string(),
            });
        }
        Ok(())
    }

    pub fn get(&self, query_id: &str) -> Option<&BTreeMap<String, RelevanceLabel>> {
        self.judgments.get(query_id)
    }

    pub fn label(&self, query_id: &str, doc_id: &str) -> Option<RelevanceLabel> {
        self.judgments.get(query_id)?.get(doc_id).copied()
    }

    pub fn queries(&self) -> impl Iterator<Item = &str> {
        self.judgments.keys().map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.judgments.len()
    }

    pub fn is_empty(&self) -> bool {
        self.judgments.is_empty()
    }

    /// Parses `query_id\tdoc_id\tlabel` lines.
    pub fn from_tsv(text: &str, origin: &Path) -> Result<Self, MetricError> {
        let mut qrels = Qrels::new();
        for (lineno, fields) in tsv_rows(text) {
            let parse_err = |message: String| MetricError::Parse {
                path: origin.to_path_buf(),
                line: lineno,
                message,
            };
            let [qid, did, label] = fields.as_slice() else {
                return Err(parse_err(format!("expected 3 tab-separated fields, got {}", fields.len())));
            };
            let label: RelevanceLabel = label.parse().map_err(|e| parse_err(format!("{e}")))?;
            qrels.insert(qid, did, label).map_err(|e| parse_err(e.to_string()))?;
        }
        Ok(qrels)
    }

    pub fn load(path: &Path) -> Result<Self, MetricError> {
        let text = read(path)?;
        Qrels::from_tsv(&text, path)
    }
}

/// Scored documents per query, kept sorted by (score desc, doc_id asc).
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RunRanking {
    rankings: BTreeMap<String, Vec<(String, f64)>>,
}

impl RunRanking {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_entries<Q, D>(entries: impl IntoIterator<Item = (Q, D, f64)>) -> Result<Self, MetricError>
    where
        Q: Into<String>,
        D: Into<String>,
    {
        let mut rankings: BTreeMap<String, Vec<(String, f64)>> = BTreeMap::new();
        for (q, d, score) in entries {
            if !score.is_finite() {
                return Err(MetricError::NonFiniteScore(score));
            }
            rankings.entry(q.into()).or_default().push((d.into(), score));
        }
        for (qid, list) in rankings.iter_mut() {
            let mut seen = std::collections::HashSet::new();
            if let Some((doc, _)) = list.iter().find(|(d, _)| !seen.insert(d.clone())) {
                return Err(MetricError::DuplicateRunEntry {
                    query_id: qid.clone(),
                    doc_id: doc.clone(),
                });
            }
            list.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
        }
        Ok(RunRanking { rankings })
    }

    pub fn get(&self, query_id: &str) -> Option<&[(String, f64)]> {
        self.rankings.get(query_id).map(Vec::as_slice)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &[(String, f64)])> {
        self.rankings.iter().map(|(q, v)| (q.as_str(), v.as_slice()))
    }

    pub fn len(&self) -> usize {
        self.rankings.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rankings.is_empty()
    }

    /// Parses `query_id\tdoc_id\tscore` lines.
    pub fn from_tsv(text: &str, origin: &Path) -> Result<Self, MetricError> {
        let mut entries = Vec::new();
        for (lineno, fields) in tsv_rows(text) {
            let parse_err = |message: String| MetricError::Parse {
                path: origin.to_path_buf(),
                line: lineno,
                message,
            };
            let [qid, did, score] = fields.as_slice() else {
                return Err(parse_err(format!("expected 3 tab-separated fields, got {}", fields.len())));
            };
            let score: f64 = score.trim().parse().map_err(|_| parse_err(format!("invalid score {score:?}")))?;
            entries.push((qid.to_string(), did.to_string(), score));
        }
        RunRanking::from_entries(entries)
    }

    pub fn load(path: &Path) -> Result<Self, MetricError> {
        let text = read(path)?;
        RunRanking::from_tsv(&text, path)
    }
}

fn read(path: &Path) -> Result<String, MetricError> {
    std::fs::read_to_string(path).map_err(|source| MetricError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn tsv_rows(text: &str) -> impl Iterator<Item = (usize, Vec<&str>)> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| (i + 1, l.split('\t').collect()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn run_is_sorted_with_doc_id_tiebreak() {
        let run = RunRanking::from_entries([("q", "b", 1.0), ("q", "a", 1.0), ("q", "c", 2.0)]).unwrap();
        let docs: Vec<_> = run.get("q").unwrap().iter().map(|(d, _)| d.as_str()).collect();
        assert_eq!(docs, ["c", "a", "b"]);
    }

    #[test]
    fn duplicates_rejected() {
        assert!(RunRanking::from_entries([("q", "a", 1.0), ("q", "b", 0.5), ("q", "a", 0.1)]).is_err());
        let mut qrels = Qrels::new();
        qrels.insert("q", "a", RelevanceLabel::ONE).unwrap();
        assert!(qrels.insert("q", "a", RelevanceLabel::TWO).is_err());
    }

    #[test]
    fn tsv_parsing_reports_line() {
        let p = Path::new("qrels.tsv");
        let q = Qrels::from_tsv("q1\td1\t3\nq1\td2\t0\n", p).unwrap();
        assert_eq!(q.label("q1", "d1"), Some(RelevanceLabel::THREE));
        let err = Qrels::from_tsv("q1\td1\t3\nq1\td2\t7\n", p).unwrap_err();
        assert!(err.to_string().starts_with("qrels.tsv:2:"), "{err}");
        assert!(RunRanking::from_tsv("q1\td1\tx\n", p).is_err());
    }
}
