//! Independent oracles and fixtures shared by the integration tests. Nothing
//! here calls into the code under test except for constructors.
#![allow(dead_code)]

use std::collections::BTreeMap;

use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use ssra::corpus::{assemble_document, DocumentTable, PairRecord, Provenance, Query};
use ssra::loss::{EmbeddingBatch, LossResult};
use ssra::RelevanceLabel;

pub fn label(v: u8) -> RelevanceLabel {
    RelevanceLabel::new(i64::from(v)).unwrap()
}

/// (occurrence count, number of distinct queries) for the SFT query model.
pub const SFT_HISTOGRAM: [(usize, usize); 11] = [
    (1, 26_475),
    (2, 1_308),
    (3, 164),
    (4, 46),
    (5, 17),
    (6, 10),
    (7, 3),
    (8, 2),
    (9, 1),
    (16, 1),
    (26, 1),
];

/// Same for the stage-1 query model.
pub const STAGE1_HISTOGRAM: [(usize, usize); 11] = [
    (1, 27_232),
    (2, 996),
    (3, 145),
    (4, 38),
    (5, 16),
    (6, 8),
    (7, 1),
    (8, 2),
    (9, 1),
    (13, 1),
    (16, 1),
];

/// (target label, matched, total) before and after stage 2.
pub const CONSISTENCY_STAGE1: [(u8, usize, usize); 3] = [(1, 16, 40), (2, 16, 40), (3, 38, 40)];
pub const CONSISTENCY_STAGE2: [(u8, usize, usize); 3] = [(1, 26, 40), (2, 26, 40), (3, 35, 40)];

/// Expands a frequency histogram into a query list, with repeats spread out
/// and some surface variation that normalizes away.
pub fn expand_histogram(histogram: &[(usize, usize)], prefix: &str) -> Vec<String> {
    let mut out = Vec::new();
    let mut id = 0usize;
    for &(freq, count) in histogram {
        for _ in 0..count {
            for rep in 0..freq {
                let text = format!("{prefix} query {id}");
                out.push(if rep % 2 == 1 { format!("  {}  ", text.to_uppercase()) } else { text });
            }
            id += 1;
        }
    }
    // Deterministic interleave so duplicates are not adjacent.
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    for i in (1..out.len()).rev() {
        let j = rng.random_range(0..=i);
        out.swap(i, j);
    }
    out
}

fn gain(label: u8, exponential: bool) -> f64 {
    if exponential {
        2f64.powi(i32::from(label)) - 1.0
    } else {
        f64::from(label)
    }
}

fn plain_dcg(labels: &[u8], k: usize, exponential: bool) -> f64 {
    let mut total = 0.0;
    for (i, &l) in labels.iter().enumerate().take(k) {
        total += gain(l, exponential) / (i as f64 + 2.0).log2();
    }
    total
}

fn best_permutation(rest: &mut Vec<u8>, prefix: &mut Vec<u8>, k: usize, exponential: bool, best: &mut f64) {
    if rest.is_empty() || prefix.len() == k {
        *best = best.max(plain_dcg(prefix, k, exponential));
        return;
    }
    for i in 0..rest.len() {
        let x = rest.remove(i);
        prefix.push(x);
        best_permutation(rest, prefix, k, exponential, best);
        prefix.pop();
        rest.insert(i, x);
    }
}

/// nDCG@k by brute force: the ideal is the best DCG over every ordering of
/// the judged documents. Unjudged ranked documents gain 0; a query with no
/// positive judgment scores 0.
pub fn ndcg_oracle(judged: &BTreeMap<String, u8>, ranked: &[String], k: usize, exponential: bool) -> f64 {
    let labels: Vec<u8> = ranked.iter().map(|d| judged.get(d).copied().unwrap_or(0)).collect();
    let mut best = 0.0;
    best_permutation(&mut judged.values().copied().collect(), &mut Vec::new(), k, exponential, &mut best);
    if best == 0.0 {
        0.0
    } else {
        plain_dcg(&labels, k, exponential) / best
    }
}

/// AP as (1/R) * sum over ranks k of P@k * rel_k, with P@k recounted from the
/// prefix at every rank. Ties keep input order.
pub fn ap_oracle(pairs: &[(f64, u8)], threshold: u8) -> Option<f64> {
    let mut ranked: Vec<(f64, u8)> = pairs.to_vec();
    ranked.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap());
    let rel: Vec<bool> = ranked.iter().map(|&(_, l)| l >= threshold).collect();
    let r = rel.iter().filter(|&&x| x).count();
    if r == 0 {
        return None;
    }
    let mut sum = 0.0;
    for k in 1..=rel.len() {
        if rel[k - 1] {
            let hits = rel[..k].iter().filter(|&&x| x).count();
            sum += hits as f64 / k as f64;
        }
    }
    Some(sum / r as f64)
}

pub fn random_batch(rng: &mut ChaCha8Rng, n: usize, d: usize, tau: f64) -> EmbeddingBatch {
    let vec = |rng: &mut ChaCha8Rng| (0..d).map(|_| rng.random_range(-1.0..1.0)).collect::<Vec<f64>>();
    let queries = (0..n).map(|_| vec(rng)).collect();
    let documents = (0..n).map(|_| vec(rng)).collect();
    // At least one positive-weight anchor.
    let labels = (0..n).map(|i| if i == 0 { label(3) } else { label(rng.random_range(0..4u8)) }).collect();
    EmbeddingBatch::new(queries, documents, labels, tau)
}

/// Central finite differences of `loss` w.r.t. every query and document
/// component.
pub fn finite_difference(batch: &EmbeddingBatch, h: f64, loss: impl Fn(&EmbeddingBatch) -> f64) -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
    let shape = |rows: &Vec<Vec<f64>>| rows.iter().map(|r| vec![0.0; r.len()]).collect::<Vec<_>>();
    let mut gq = shape(&batch.queries);
    let mut gd = shape(&batch.documents);
    let mut probe = batch.clone();
    for i in 0..batch.queries.len() {
        for j in 0..batch.dim() {
            let x = batch.queries[i][j];
            probe.queries[i][j] = x + h;
            let plus = loss(&probe);
            probe.queries[i][j] = x - h;
            let minus = loss(&probe);
            probe.queries[i][j] = x;
            gq[i][j] = (plus - minus) / (2.0 * h);

            let x = batch.documents[i][j];
            probe.documents[i][j] = x + h;
            let plus = loss(&probe);
            probe.documents[i][j] = x - h;
            let minus = loss(&probe);
            probe.documents[i][j] = x;
            gd[i][j] = (plus - minus) / (2.0 * h);
        }
    }
    (gq, gd)
}

/// ||a - b|| / max(||a||, ||b||), 0 when both are zero.
pub fn relative_error(a: &[Vec<f64>], b: &[Vec<f64>]) -> f64 {
    let norm = |rows: &[Vec<f64>]| rows.iter().flatten().map(|x| x * x).sum::<f64>().sqrt();
    let diff: f64 = a
        .iter()
        .flatten()
        .zip(b.iter().flatten())
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt();
    let scale = norm(a).max(norm(b));
    if scale == 0.0 {
        diff
    } else {
        diff / scale
    }
}

/// Worst relative error of the analytic gradients against finite differences.
pub fn gradient_check(batch: &EmbeddingBatch, analytic: &LossResult, loss: impl Fn(&EmbeddingBatch) -> f64) -> f64 {
    let (fq, fd) = finite_difference(batch, 1e-6, loss);
    relative_error(&analytic.grad_queries, &fq).max(relative_error(&analytic.grad_documents, &fd))
}

/// Planted 1,000-record corpus: 500/100/100/300 records for labels 0..3,
/// 800 distinct normalized queries, 250 distinct documents. Records 800..999
/// repeat queries 0..199 with different case and spacing.
pub fn planted_stats_corpus() -> Vec<PairRecord> {
    let label_of = |i: usize| match i % 10 {
        0..=4 => 0,
        5 => 1,
        6 => 2,
        _ => 3,
    };
    (0..1000)
        .map(|i| {
            let text = if i < 800 {
                format!("planted query {i}")
            } else {
                format!("  PLANTED   Query {} ", i - 800)
            };
            PairRecord::labeled(Query::new(format!("p{i}"), text).unwrap(), format!("doc{}", i % 250), label(label_of(i)))
        })
        .collect()
}

pub fn doc_table(ids: impl IntoIterator<Item = String>) -> DocumentTable {
    let mut table = DocumentTable::new();
    for id in ids {
        let title = format!("title of {id}");
        table
            .insert(assemble_document(&id, &title, Some("ocr text"), Some("asr text"), None).unwrap())
            .unwrap();
    }
    table
}

pub fn synthetic(query_id: &str, text: &str, doc: &str, target: u8) -> PairRecord {
    PairRecord::labeled(Query::new(query_id, text).unwrap(), doc, label(target))
        .with_provenance(Provenance::SyntheticFiltered)
        .with_target_label(label(target))
}
