use serde::{Deserialize, Serialize};

use crate::corpus::RelevanceLabel;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct MatchCount {
    pub matched: usize,
    pub total: usize,
}

impl MatchCount {
    pub fn rate(&self) -> Option<f64> {
        (self.total > 0).then(|| self.matched as f64 / self.total as f64)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConsistencyRow {
    pub target_label: RelevanceLabel,
    #[serde(flatten)]
    pub counts: MatchCount,
}

/// How often judged labels match the intended target label.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConsistencyReport {
    /// One row per target label seen, ascending.
    pub rows: Vec<ConsistencyRow>,
    pub overall: MatchCount,
}

impl ConsistencyReport {
    pub fn row(&self, label: RelevanceLabel) -> Option<MatchCount> {
        self.rows.iter().find(|r| r.target_label == label).map(|r| r.counts)
    }

    /// Builds a report from pre-tallied `(target, matched, total)` rows.
    pub fn from_counts(rows: impl IntoIterator<Item = (RelevanceLabel, usize, usize)>) -> Self {
        let mut per = [MatchCount::default(); 4];
        let mut seen = [false; 4];
        for (label, matched, total) in rows {
            assert!(matched <= total, "matched exceeds total");
            per[label.index()].matched += matched;
            per[label.index()].total += total;
            seen[label.index()] = true;
        }
        Self::assemble(per, seen)
    }

    fn assemble(per: [MatchCount; 4], seen: [bool; 4]) -> Self {
        let rows: Vec<ConsistencyRow> = RelevanceLabel::ALL
            .into_iter()
            .filter(|l| seen[l.index()])
            .map(|l| ConsistencyRow {
                target_label: l,
                counts: per[l.index()],
            })
            .collect();
        let overall = MatchCount {
            matched: rows.iter().map(|r| r.counts.matched).sum(),
            total: rows.iter().map(|r| r.counts.total).sum(),
        };
        ConsistencyReport { rows, overall }
    }
}

pub fn consistency_rate(annotations: &[(RelevanceLabel, RelevanceLabel)]) -> ConsistencyReport {
    let mut per = [MatchCount::default(); 4];
    let mut seen = [false; 4];
    for &(target, judged) in annotations {
        let slot = &mut per[target.index()];
        slot.total += 1;
        if target == judged {
            slot.matched += 1;
        }
        seen[target.index()] = true;
    }
    ConsistencyReport::assemble(per, seen)
}

/// (after - before) / before on overall rates, as a fraction.
pub fn relative_improvement(before: &ConsistencyReport, after: &ConsistencyReport) -> Option<f64> {
    let b = before.overall.rate()?;
    let a = after.overall.rate()?;
    (b > 0.0).then(|| (a - b) / b)
}
