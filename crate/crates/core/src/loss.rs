//! Label-weighted InfoNCE with in-batch negatives.
//!
//! For anchor query `i` the candidates are every document in the batch plus
//! any hard negatives attached to that anchor; document `i` is the positive.
//! With `sim(u, v) = cos(u, v) / tau`:
//!
//! ```text
//! l_i  = -w(s_i) * log( exp(sim(q_i, d_i)) / sum_c exp(sim(q_i, c)) )
//! loss = sum_i l_i / #{i : w(s_i) > 0}
//! ```
//!
//! Gradients are the exact derivatives of that expression with respect to
//! every query, document and hard-negative vector.

use serde::{Deserialize, Serialize};

use crate::corpus::RelevanceLabel;

pub const DEFAULT_TEMPERATURE: f64 = 0.05;

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum LossError {
    #[error("batch is empty")]
    EmptyBatch,
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("{which} vector {index} has zero norm")]
    ZeroNorm { which: &'static str, index: usize },
    #[error("temperature must be > 0 (got {0})")]
    NonPositiveTemperature(f64),
    #[error("weight for label {label} is {weight}; weights must be finite and >= 0")]
    InvalidWeight { label: RelevanceLabel, weight: f64 },
    #[error("all weights zero: mean over positive-weight anchors is undefined")]
    AllWeightsZero,
    #[error("embedding contains a non-finite value")]
    NonFinite,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Similarity {
    #[default]
    Cosine,
    Dot,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingBatch {
    pub queries: Vec<Vec<f64>>,
    pub documents: Vec<Vec<f64>>,
    pub labels: Vec<RelevanceLabel>,
    pub temperature: f64,
    /// Optional extra negatives per anchor: empty, or one list per anchor.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub hard_negatives: Vec<Vec<Vec<f64>>>,
    #[serde(default)]
    pub similarity: Similarity,
}

impl EmbeddingBatch {
    pub fn new(queries: Vec<Vec<f64>>, documents: Vec<Vec<f64>>, labels: Vec<RelevanceLabel>, temperature: f64) -> Self {
        EmbeddingBatch {
            queries,
            documents,
            labels,
            temperature,
            hard_negatives: Vec::new(),
            similarity: Similarity::Cosine,
        }
    }

    pub fn dim(&self) -> usize {
        self.queries.first().map_or(0, Vec::len)
    }

    fn validate(&self) -> Result<(), LossError> {
        let n = self.queries.len();
        if n == 0 {
            return Err(LossError::EmptyBatch);
        }
        if self.documents.len() != n || self.labels.len() != n {
            return Err(LossError::Shape(format!(
                "{n} queries, {} documents, {} labels",
                self.documents.len(),
                self.labels.len()
            )));
        }
        if !self.hard_negatives.is_empty() && self.hard_negatives.len() != n {
            return Err(LossError::Shape(format!(
                "hard negatives given for {} of {n} anchors",
                self.hard_negatives.len()
            )));
        }
        if self.temperature.is_nan() || self.temperature <= 0.0 || !self.temperature.is_finite() {
            return Err(LossError::NonPositiveTemperature(self.temperature));
        }
        let d = self.dim();
        if d == 0 {
            return Err(LossError::Shape("dimension 0".into()));
        }
        type Vectors<'a> = Box<dyn Iterator<Item = &'a Vec<f64>> + 'a>;
        let groups: [(&'static str, Vectors<'_>); 3] = [
            ("query", Box::new(self.queries.iter())),
            ("document", Box::new(self.documents.iter())),
            ("hard negative", Box::new(self.hard_negatives.iter().flatten())),
        ];
        for (which, vectors) in groups {
            for (index, v) in vectors.enumerate() {
                if v.len() != d {
                    return Err(LossError::Shape(format!(
                        "{which} vector {index} has dimension {}, expected {d}",
                        v.len()
                    )));
                }
                if v.iter().any(|x| !x.is_finite()) {
                    return Err(LossError::NonFinite);
                }
                if self.similarity == Similarity::Cosine && norm(v) == 0.0 {
                    return Err(LossError::ZeroNorm { which, index });
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LossResult {
    pub loss: f64,
    pub grad_queries: Vec<Vec<f64>>,
    pub grad_documents: Vec<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub grad_hard_negatives: Vec<Vec<Vec<f64>>>,
}

/// w(s) = s / 3.
pub fn weight_default(label: RelevanceLabel) -> f64 {
    label.value() as f64 / 3.0
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

/// Similarity scaled by 1/tau.
fn similarity(kind: Similarity, u: &[f64], v: &[f64], nu: f64, nv: f64, tau: f64) -> f64 {
    let raw = match kind {
        Similarity::Cosine => dot(u, v) / (nu * nv),
        Similarity::Dot => dot(u, v),
    };
    raw / tau
}

/// Adds `coef * d sim(u, v) / du` into `gu` and `coef * d sim / dv` into `gv`.
#[allow(clippy::too_many_arguments)]
fn backprop(kind: Similarity, u: &[f64], v: &[f64], nu: f64, nv: f64, tau: f64, coef: f64, gu: &mut [f64], gv: &mut [f64]) {
    match kind {
        Similarity::Cosine => {
            let cos = dot(u, v) / (nu * nv);
            let c = coef / tau;
            // d cos/du = v/(|u||v|) - cos * u/|u|^2
            axpy(c / (nu * nv), v, gu);
            axpy(-c * cos / (nu * nu), u, gu);
            axpy(c / (nu * nv), u, gv);
            axpy(-c * cos / (nv * nv), v, gv);
        }
        Similarity::Dot => {
            axpy(coef / tau, v, gu);
            axpy(coef / tau, u, gv);
        }
    }
}

pub fn weighted_infonce(batch: &EmbeddingBatch, weight_fn: impl Fn(RelevanceLabel) -> f64) -> Result<LossResult, LossError> {
    batch.validate()?;
    let n = batch.queries.len();
    let d = batch.dim();
    let tau = batch.temperature;
    let kind = batch.similarity;

    let weights: Vec<f64> = batch
        .labels
        .iter()
        .map(|&label| {
            let weight = weight_fn(label);
            if weight.is_finite() && weight >= 0.0 {
                Ok(weight)
            } else {
                Err(LossError::InvalidWeight { label, weight })
            }
        })
        .collect::<Result<_, _>>()?;
    let active = weights.iter().filter(|&&w| w > 0.0).count();
    if active == 0 {
        return Err(LossError::AllWeightsZero);
    }
    let denom = active as f64;

    let qn: Vec<f64> = batch.queries.iter().map(|v| norm(v)).collect();
    let dn: Vec<f64> = batch.documents.iter().map(|v| norm(v)).collect();

    let mut loss = 0.0;
    let mut grad_queries = vec![vec![0.0; d]; n];
    let mut grad_documents = vec![vec![0.0; d]; n];
    let mut grad_hard_negatives: Vec<Vec<Vec<f64>>> = batch.hard_negatives.iter().map(|negs| vec![vec![0.0; d]; negs.len()]).collect();

    for i in 0..n {
        let w = weights[i];
        if w == 0.0 {
            continue;
        }
        let q = &batch.queries[i];
        let hard: &[Vec<f64>] = batch.hard_negatives.get(i).map_or(&[], Vec::as_slice);
        let hard_norms: Vec<f64> = hard.iter().map(|v| norm(v)).collect();

        let mut logits = Vec::with_capacity(n + hard.len());
        for (doc, &norm_d) in batch.documents.iter().zip(&dn) {
            logits.push(similarity(kind, q, doc, qn[i], norm_d, tau));
        }
        for (h, v) in hard.iter().enumerate() {
            logits.push(similarity(kind, q, v, qn[i], hard_norms[h], tau));
        }
        let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let sum_exp: f64 = logits.iter().map(|z| (z - max).exp()).sum();
        let lse = max + sum_exp.ln();
        loss += w * (lse - logits[i]);

        // dl_i/dz_c = w (p_c - [c == i]), scaled by the mean's denominator
        let scale = w / denom;
        let mut gq = vec![0.0; d];
        for j in 0..n {
            let p = (logits[j] - lse).exp();
            let coef = scale * (p - if j == i { 1.0 } else { 0.0 });
            backprop(kind, q, &batch.documents[j], qn[i], dn[j], tau, coef, &mut gq, &mut grad_documents[j]);
        }
        for (h, v) in hard.iter().enumerate() {
            let p = (logits[n + h] - lse).exp();
            backprop(kind, q, v, qn[i], hard_norms[h], tau, scale * p, &mut gq, &mut grad_hard_negatives[i][h]);
        }
        axpy(1.0, &gq, &mut grad_queries[i]);
    }

    Ok(LossResult {
        loss: loss / denom,
        grad_queries,
        grad_documents,
        grad_hard_negatives,
    })
}

/// Frobenius norm of a gradient block.
pub fn frobenius(rows: &[Vec<f64>]) -> f64 {
    rows.iter().flatten().map(|x| x * x).sum::<f64>().sqrt()
}
