use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{MetricError, Qrels, RunRanking};
use crate::corpus::RelevanceLabel;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Gain {
    /// g(r) = r
    #[default]
    Linear,
    /// g(r) = 2^r - 1
    Exponential,
}

impl Gain {
    pub fn apply(self, label: RelevanceLabel) -> f64 {
        let r = label.value() as f64;
        match self {
            Gain::Linear => r,
            Gain::Exponential => r.exp2() - 1.0,
        }
    }
}

/// What to do with run documents that have no judgment.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UnjudgedPolicy {
    #[default]
    AsZero,
    Strict,
}

/// Queries whose judged labels are all zero have no ideal gain.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ZeroQueryPolicy {
    /// nDCG = 0 and the query is averaged in.
    #[default]
    CountAsZero,
    Exclude,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct NdcgOptions {
    pub gain: Gain,
    pub unjudged: UnjudgedPolicy,
    pub zero_queries: ZeroQueryPolicy,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NdcgResult {
    pub k: usize,
    pub options: NdcgOptions,
    pub per_query: BTreeMap<String, f64>,
    /// Mean over evaluated queries; `None` if none were evaluated.
    pub mean: Option<f64>,
    /// Queries with no positive judgment.
    pub zero_label_queries: Vec<String>,
}

/// DCG@k of labels given in rank order: sum of g(rel_i) / log2(i + 1).
pub fn dcg(ranked: &[RelevanceLabel], k: usize, gain: Gain) -> f64 {
    ranked
        .iter()
        .take(k)
        .enumerate()
        .map(|(i, &l)| gain.apply(l) / ((i + 2) as f64).log2())
        .sum()
}

/// DCG@k of the best possible ordering of `judged`.
pub fn ideal_dcg(judged: impl IntoIterator<Item = RelevanceLabel>, k: usize, gain: Gain) -> f64 {
    let mut labels: Vec<RelevanceLabel> = judged.into_iter().collect();
    labels.sort_unstable_by(|a, b| b.cmp(a));
    dcg(&labels, k, gain)
}

pub fn ndcg_at_k(qrels: &Qrels, run: &RunRanking, k: usize, options: NdcgOptions) -> Result<NdcgResult, MetricError> {
    if k == 0 {
        return Err(MetricError::InvalidCutoff);
    }
    let mut per_query = BTreeMap::new();
    let mut zero_label_queries = Vec::new();
    for (query_id, ranking) in run.iter() {
        let judged = qrels.get(query_id).ok_or_else(|| MetricError::QueryNotJudged(query_id.to_string()))?;
        let mut ranked = Vec::with_capacity(ranking.len().min(k));
        for (doc_id, _) in ranking.iter().take(k) {
            let label = match (judged.get(doc_id), options.unjudged) {
                (Some(&l), _) => l,
                (None, UnjudgedPolicy::AsZero) => RelevanceLabel::ZERO,
                (None, UnjudgedPolicy::Strict) => {
                    return Err(MetricError::UnjudgedDocument {
                        query_id: query_id.to_string(),
                        doc_id: doc_id.clone(),
                    })
                }
            };
            ranked.push(label);
        }
        let ideal = ideal_dcg(judged.values().copied(), k, options.gain);
        if ideal == 0.0 {
            zero_label_queries.push(query_id.to_string());
            if options.zero_queries == ZeroQueryPolicy::Exclude {
                continue;
            }
            per_query.insert(query_id.to_string(), 0.0);
            continue;
        }
        let value = (dcg(&ranked, k, options.gain) / ideal).clamp(0.0, 1.0);
        per_query.insert(query_id.to_string(), value);
    }
    let mean = (!per_query.is_empty()).then(|| per_query.values().sum::<f64>() / per_query.len() as f64);
    Ok(NdcgResult {
        k,
        options,
        per_query,
        mean,
        zero_label_queries,
    })
}
