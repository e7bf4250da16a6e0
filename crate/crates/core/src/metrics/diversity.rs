use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use crate::corpus::normalize_query;
use crate::util::round_half_even;

/// Exact-match duplication statistics over normalized query text.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiversityReport {
    pub total: usize,
    pub unique: usize,
    /// (total - unique) / total, as a fraction; 0 for an empty list.
    pub duplicate_rate: f64,
    /// Occurrence count -> number of distinct queries occurring that often.
    pub histogram: BTreeMap<usize, usize>,
}

impl DiversityReport {
    /// Duplicate rate in percent, two decimals, ties to even.
    pub fn duplicate_rate_pct(&self) -> f64 {
        round_half_even(100.0 * self.duplicate_rate, 2)
    }
}

pub fn duplicate_rate<S: AsRef<str>>(queries: &[S]) -> DiversityReport {
    let mut counts: HashMap<String, usize> = HashMap::new();
    for q in queries {
        *counts.entry(normalize_query(q.as_ref())).or_default() += 1;
    }
    let mut histogram = BTreeMap::new();
    for &freq in counts.values() {
        *histogram.entry(freq).or_default() += 1;
    }
    let total = queries.len();
    let unique = counts.len();
    let duplicate_rate = if total == 0 { 0.0 } else { (total - unique) as f64 / total as f64 };
    DiversityReport {
        total,
        unique,
        duplicate_rate,
        histogram,
    }
}

/// Relative decrease in percent between two reported (rounded) duplicate rates.
pub fn relative_decrease_pct(before: &DiversityReport, after: &DiversityReport) -> Option<f64> {
    let b = before.duplicate_rate_pct();
    let a = after.duplicate_rate_pct();
    (b > 0.0).then(|| 100.0 * (b - a) / b)
}

/// Same as [`relative_decrease_pct`] but on the unrounded rates.
pub fn relative_decrease_exact_pct(before: &DiversityReport, after: &DiversityReport) -> Option<f64> {
    (before.duplicate_rate > 0.0).then(|| 100.0 * (before.duplicate_rate - after.duplicate_rate) / before.duplicate_rate)
}
