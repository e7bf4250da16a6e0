use serde::{Deserialize, Serialize};

use super::MetricError;
use crate::corpus::RelevanceLabel;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ApResult {
    pub threshold: u8,
    pub ap: f64,
    pub n_pairs: usize,
    pub n_positive: usize,
    /// Pairs sharing their score with at least one other pair; non-zero means
    /// the result depends on input order.
    pub n_tied: usize,
}

/// Average precision after binarizing at `label >= threshold`.
///
/// Pairs are ranked by score descending; equal scores keep input order.
pub fn average_precision_at_threshold(pairs: &[(f64, RelevanceLabel)], threshold: u8) -> Result<ApResult, MetricError> {
    if !(1..=3).contains(&threshold) {
        return Err(MetricError::InvalidThreshold(threshold));
    }
    if let Some(&(bad, _)) = pairs.iter().find(|(s, _)| !s.is_finite()) {
        return Err(MetricError::NonFiniteScore(bad));
    }
    let mut order: Vec<usize> = (0..pairs.len()).collect();
    order.sort_by(|&a, &b| pairs[b].0.total_cmp(&pairs[a].0));

    let mut hits = 0usize;
    let mut sum = 0.0;
    for (rank, &idx) in order.iter().enumerate() {
        if pairs[idx].1.value() >= threshold {
            hits += 1;
            sum += hits as f64 / (rank + 1) as f64;
        }
    }
    if hits == 0 {
        return Err(MetricError::NoPositives(threshold));
    }

    let mut n_tied = 0;
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && pairs[order[end]].0 == pairs[order[start]].0 {
            end += 1;
        }
        if end - start > 1 {
            n_tied += end - start;
        }
        start = end;
    }

    Ok(ApResult {
        threshold,
        ap: sum / hits as f64,
        n_pairs: pairs.len(),
        n_positive: hits,
        n_tied,
    })
}

/// AP at thresholds 1, 2 and 3 plus their mean.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairClassificationReport {
    pub by_threshold: Vec<ApResult>,
    pub mean_ap: f64,
}

pub fn pair_classification(pairs: &[(f64, RelevanceLabel)]) -> Result<PairClassificationReport, MetricError> {
    let by_threshold = (1..=3).map(|t| average_precision_at_threshold(pairs, t)).collect::<Result<Vec<_>, _>>()?;
    let mean_ap = by_threshold.iter().map(|r| r.ap).sum::<f64>() / by_threshold.len() as f64;
    Ok(PairClassificationReport { by_threshold, mean_ap })
}
