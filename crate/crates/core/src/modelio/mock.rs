//! Deterministic offline backends.
//!
//! Every mock is a pure function of its construction parameters (seed,
//! fixtures) and call inputs, so pipelines built on them are reproducible.

use std::collections::{HashMap, HashSet, VecDeque};
use std::sync::Mutex;

use rand::seq::index;
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::backend::{ChatBackend, ChatRequest};
use super::grammar::{parse_score_reply, OrderVerdict, ScoreJudgment};
use super::roles::{PairwiseJudge, QueryModel, ReasoningModel, Rewriter, ScoreModel};
use super::ModelError;
use crate::corpus::text::overlap_tokens;
use crate::corpus::{normalize_query, Document, Query, RelevanceLabel};

/// FNV-1a over the parts, with a separator byte between them.
pub fn stable_hash(seed: u64, parts: &[&str]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325 ^ seed.wrapping_mul(0x9e37_79b9_7f4a_7c15);
    for part in parts {
        for &b in part.as_bytes() {
            h ^= b as u64;
            h = h.wrapping_mul(0x0100_0000_01b3);
        }
        h ^= 0xff;
        h = h.wrapping_mul(0x0100_0000_01b3);
    }
    h
}

/// Uniform value in [0, 1) derived from [`stable_hash`].
pub fn stable_unit(seed: u64, parts: &[&str]) -> f64 {
    (stable_hash(seed, parts) >> 11) as f64 / (1u64 << 53) as f64
}

/// Jaccard similarity of the overlap-token sets of two texts.
pub fn token_jaccard(a: &str, b: &str) -> f64 {
    let a: HashSet<String> = overlap_tokens(a).into_iter().collect();
    let b: HashSet<String> = overlap_tokens(b).into_iter().collect();
    let union = a.union(&b).count();
    if union == 0 {
        return 0.0;
    }
    a.intersection(&b).count() as f64 / union as f64
}

/// Label buckets on query/title overlap: >= 0.75, >= 0.5, >= 0.25.
pub fn overlap_label(jaccard: f64) -> RelevanceLabel {
    if jaccard >= 0.75 {
        RelevanceLabel::THREE
    } else if jaccard >= 0.5 {
        RelevanceLabel::TWO
    } else if jaccard >= 0.25 {
        RelevanceLabel::ONE
    } else {
        RelevanceLabel::ZERO
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum MockScore {
    Label(RelevanceLabel),
    /// A raw model reply, run through the score grammar.
    Reply(String),
}

/// Score fixture keyed by (normalized query, doc_id).
#[derive(Debug, Default, Clone)]
pub struct TableScorer {
    table: HashMap<(String, String), MockScore>,
    fallback: Option<RelevanceLabel>,
}

impl TableScorer {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with(mut self, query: &str, doc_id: &str, label: RelevanceLabel) -> Self {
        self.insert(query, doc_id, MockScore::Label(label));
        self
    }

    pub fn with_reply(mut self, query: &str, doc_id: &str, reply: &str) -> Self {
        self.insert(query, doc_id, MockScore::Reply(reply.to_string()));
        self
    }

    pub fn with_fallback(mut self, label: RelevanceLabel) -> Self {
        self.fallback = Some(label);
        self
    }

    pub fn insert(&mut self, query: &str, doc_id: &str, score: MockScore) {
        self.table.insert((normalize_query(query), doc_id.to_string()), score);
    }
}

impl ScoreModel for TableScorer {
    fn score(&self, query: &Query, doc: &Document) -> Result<ScoreJudgment, ModelError> {
        match self.table.get(&(query.normalized(), doc.doc_id.clone())) {
            Some(MockScore::Label(label)) => Ok(ScoreJudgment {
                label: *label,
                rationale: None,
            }),
            Some(MockScore::Reply(reply)) => parse_score_reply(reply),
            None => self
                .fallback
                .map(|label| ScoreJudgment { label, rationale: None })
                .ok_or_else(|| ModelError::Endpoint(format!("no fixture for ({:?}, {:?})", query.text, doc.doc_id))),
        }
    }
}

/// Labels by query/title token overlap; optional seeded label noise.
#[derive(Debug, Clone, Default)]
pub struct OverlapScorer {
    seed: u64,
    noise_rate: f64,
}

impl OverlapScorer {
    pub fn new() -> Self {
        Self::default()
    }

    /// With probability `rate` (decided per pair by hash) the label is moved
    /// to a different one.
    pub fn with_noise(seed: u64, rate: f64) -> Self {
        OverlapScorer { seed, noise_rate: rate }
    }

    pub fn label_for(&self, query: &str, doc: &Document) -> RelevanceLabel {
        let base = if normalize_query(query) == normalize_query(&doc.title) {
            RelevanceLabel::THREE
        } else {
            overlap_label(token_jaccard(query, &doc.title))
        };
        if self.noise_rate > 0.0 && stable_unit(self.seed, &["score-noise", query, &doc.doc_id]) < self.noise_rate {
            let shift = 1 + stable_hash(self.seed, &["score-shift", query, &doc.doc_id]) % 3;
            RelevanceLabel::new(((base.value() as u64 + shift) % 4) as i64).expect("mod 4")
        } else {
            base
        }
    }
}

impl ScoreModel for OverlapScorer {
    fn score(&self, query: &Query, doc: &Document) -> Result<ScoreJudgment, ModelError> {
        Ok(ScoreJudgment {
            label: self.label_for(&query.text, doc),
            rationale: None,
        })
    }
}

/// Emits `mock-q(<doc_id>,<label>)`, with `,<sample>` appended for sample > 0.
#[derive(Debug, Clone, Default)]
pub struct TemplateQueryGenerator;

impl QueryModel for TemplateQueryGenerator {
    fn generate(&self, doc: &Document, target: RelevanceLabel, sample: usize) -> Result<String, ModelError> {
        Ok(if sample == 0 {
            format!("mock-q({},{})", doc.doc_id, target)
        } else {
            format!("mock-q({},{},{})", doc.doc_id, target, sample)
        })
    }
}

const DISTRACTORS: [&str; 12] = [
    "vlog",
    "tutorial",
    "hd",
    "daily",
    "review",
    "compilation",
    "guide",
    "top10",
    "live",
    "clip",
    "funny",
    "latest",
];

/// Builds queries from title tokens so that their overlap with the title lands
/// in the bucket of the target label. A seeded fraction of calls aims at a
/// different label instead, giving the filters something to remove.
#[derive(Debug, Clone)]
pub struct OverlapQueryGenerator {
    seed: u64,
    misfire_rate: f64,
}

impl OverlapQueryGenerator {
    pub fn new(seed: u64, misfire_rate: f64) -> Self {
        OverlapQueryGenerator { seed, misfire_rate }
    }

    fn aimed_label(&self, doc: &Document, target: RelevanceLabel, sample: usize) -> RelevanceLabel {
        let s = sample.to_string();
        let t = target.to_string();
        if stable_unit(self.seed, &["misfire", &doc.doc_id, &t, &s]) < self.misfire_rate {
            let shift = 1 + stable_hash(self.seed, &["misfire-to", &doc.doc_id, &t, &s]) % 2;
            RelevanceLabel::new(((target.value() as u64 - 1 + shift) % 3 + 1) as i64).expect("1..=3")
        } else {
            target
        }
    }
}

/// (kept title tokens, distractors) whose Jaccard falls in the bucket for
/// `label`, closest to the bucket centre.
fn overlap_plan(n_title: usize, label: RelevanceLabel) -> Option<(usize, usize)> {
    let (lo, hi) = match label.value() {
        3 => return Some((n_title, 0)),
        2 => (0.5, 0.75),
        1 => (0.25, 0.5),
        _ => return None,
    };
    let aim = (lo + hi) / 2.0;
    let mut best: Option<((usize, usize), f64)> = None;
    for m in 0..=(2 * n_title + 3).min(DISTRACTORS.len()) {
        for k in 1..=n_title {
            let j = k as f64 / (n_title + m) as f64;
            if j >= lo && j < hi {
                let dist = (j - aim).abs();
                if best.is_none_or(|(_, d)| dist < d - 1e-12) {
                    best = Some(((k, m), dist));
                }
            }
        }
    }
    best.map(|(plan, _)| plan)
}

impl QueryModel for OverlapQueryGenerator {
    fn generate(&self, doc: &Document, target: RelevanceLabel, sample: usize) -> Result<String, ModelError> {
        let mut title_tokens: Vec<String> = Vec::new();
        for t in overlap_tokens(&doc.title) {
            if !title_tokens.contains(&t) {
                title_tokens.push(t);
            }
        }
        if title_tokens.is_empty() {
            return TemplateQueryGenerator.generate(doc, target, sample);
        }
        let aimed = self.aimed_label(doc, target, sample);
        let (k, m) = overlap_plan(title_tokens.len(), aimed).ok_or_else(|| ModelError::Precondition(format!("cannot aim at label {aimed}")))?;

        let rng_seed = stable_hash(self.seed, &["generate", &doc.doc_id, &target.to_string(), &sample.to_string()]);
        let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
        let mut picks: Vec<usize> = index::sample(&mut rng, title_tokens.len(), k).into_vec();
        picks.sort_unstable();
        let mut words: Vec<String> = picks.into_iter().map(|i| title_tokens[i].clone()).collect();
        let mut pool: Vec<&str> = DISTRACTORS.iter().copied().filter(|d| !title_tokens.iter().any(|t| t == d)).collect();
        for _ in 0..m.min(pool.len()) {
            let i = rng.random_range(0..pool.len());
            words.push(pool.swap_remove(i).to_string());
        }
        Ok(words.join(" "))
    }
}

/// Judge driven by a planted relevance table per document.
#[derive(Debug, Default, Clone)]
pub struct TableJudge {
    relevance: HashMap<(String, String), f64>,
    inverted: HashSet<(String, String, String)>,
    failing: HashSet<(String, String, String)>,
}

fn unordered(doc_id: &str, a: &str, b: &str) -> (String, String, String) {
    let (a, b) = (normalize_query(a), normalize_query(b));
    if a <= b {
        (doc_id.to_string(), a, b)
    } else {
        (doc_id.to_string(), b, a)
    }
}

impl TableJudge {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with(mut self, doc_id: &str, query: &str, relevance: f64) -> Self {
        self.relevance.insert((doc_id.to_string(), normalize_query(query)), relevance);
        self
    }

    /// Reports the opposite of the planted order for this pair.
    pub fn inverting(mut self, doc_id: &str, a: &str, b: &str) -> Self {
        self.inverted.insert(unordered(doc_id, a, b));
        self
    }

    /// Fails with an endpoint error for this pair.
    pub fn failing(mut self, doc_id: &str, a: &str, b: &str) -> Self {
        self.failing.insert(unordered(doc_id, a, b));
        self
    }
}

impl PairwiseJudge for TableJudge {
    fn judge(&self, doc: &Document, query_a: &Query, query_b: &Query) -> Result<OrderVerdict, ModelError> {
        let key = unordered(&doc.doc_id, &query_a.text, &query_b.text);
        if self.failing.contains(&key) {
            return Err(ModelError::Endpoint("injected judge failure".into()));
        }
        let rel = |q: &Query| {
            self.relevance
                .get(&(doc.doc_id.clone(), q.normalized()))
                .copied()
                .ok_or_else(|| ModelError::Endpoint(format!("no relevance fixture for {:?} on {:?}", q.text, doc.doc_id)))
        };
        let verdict = compare(rel(query_a)?, rel(query_b)?);
        Ok(if self.inverted.contains(&key) { verdict.swapped() } else { verdict })
    }
}

fn compare(a: f64, b: f64) -> OrderVerdict {
    if (a - b).abs() <= 1e-12 {
        OrderVerdict::Tie
    } else if a > b {
        OrderVerdict::AMoreRelevant
    } else {
        OrderVerdict::BMoreRelevant
    }
}

/// Orders queries by title overlap; a seeded fraction of pairs is inverted.
#[derive(Debug, Clone, Default)]
pub struct OverlapJudge {
    seed: u64,
    inversion_rate: f64,
}

impl OverlapJudge {
    pub fn new(seed: u64, inversion_rate: f64) -> Self {
        OverlapJudge { seed, inversion_rate }
    }
}

impl PairwiseJudge for OverlapJudge {
    fn judge(&self, doc: &Document, query_a: &Query, query_b: &Query) -> Result<OrderVerdict, ModelError> {
        let verdict = compare(token_jaccard(&query_a.text, &doc.title), token_jaccard(&query_b.text, &doc.title));
        let (d, lo, hi) = unordered(&doc.doc_id, &query_a.text, &query_b.text);
        if stable_unit(self.seed, &["invert", &d, &lo, &hi]) < self.inversion_rate {
            Ok(verdict.swapped())
        } else {
            Ok(verdict)
        }
    }
}

/// Rewrites `(ocr, asr)` to `"<ocr> <asr> rewritten"` (empty parts skipped).
#[derive(Debug, Clone, Default)]
pub struct MockRewriter {
    failing: HashSet<(String, String)>,
    seed: u64,
    fail_rate: f64,
}

impl MockRewriter {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_fail_rate(seed: u64, rate: f64) -> Self {
        MockRewriter {
            failing: HashSet::new(),
            seed,
            fail_rate: rate,
        }
    }

    /// Declines to rewrite this exact input.
    pub fn failing_on(mut self, ocr: &str, asr: &str) -> Self {
        self.failing.insert((ocr.to_string(), asr.to_string()));
        self
    }
}

impl Rewriter for MockRewriter {
    fn rewrite(&self, ocr: &str, asr: &str) -> Result<Option<String>, ModelError> {
        if self.failing.contains(&(ocr.to_string(), asr.to_string()))
            || (self.fail_rate > 0.0 && stable_unit(self.seed, &["rewrite", ocr, asr]) < self.fail_rate)
        {
            return Ok(None);
        }
        let parts: Vec<&str> = [ocr.trim(), asr.trim()].into_iter().filter(|s| !s.is_empty()).collect();
        Ok(Some(format!("{} rewritten", parts.join(" "))))
    }
}

/// Produces a fixed-form rationale; fails for listed query ids.
#[derive(Debug, Clone, Default)]
pub struct MockReasoner {
    failing: HashSet<String>,
}

impl MockReasoner {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn failing_on(mut self, query_id: &str) -> Self {
        self.failing.insert(query_id.to_string());
        self
    }
}

impl ReasoningModel for MockReasoner {
    fn explain(&self, query: &Query, doc: &Document, label: RelevanceLabel) -> Result<String, ModelError> {
        if self.failing.contains(&query.query_id) {
            return Err(ModelError::Endpoint(format!("injected failure for {}", query.query_id)));
        }
        Ok(format!(
            "Query {:?} against video {:?}: overlap {:.2}, consistent with level {label}.",
            query.text,
            doc.title,
            token_jaccard(&query.text, &doc.title)
        ))
    }
}

/// Chat backend that replays a script of replies and records requests.
#[derive(Debug, Default)]
pub struct ScriptedBackend {
    replies: Mutex<VecDeque<Result<String, ModelError>>>,
    requests: Mutex<Vec<ChatRequest>>,
}

impl ScriptedBackend {
    pub fn new(replies: impl IntoIterator<Item = Result<String, ModelError>>) -> Self {
        ScriptedBackend {
            replies: Mutex::new(replies.into_iter().collect()),
            requests: Mutex::new(Vec::new()),
        }
    }

    pub fn requests(&self) -> Vec<ChatRequest> {
        self.requests.lock().expect("poisoned").clone()
    }
}

impl ChatBackend for ScriptedBackend {
    fn complete(&self, request: &ChatRequest) -> Result<String, ModelError> {
        self.requests.lock().expect("poisoned").push(request.clone());
        self.replies
            .lock()
            .expect("poisoned")
            .pop_front()
            .unwrap_or_else(|| Err(ModelError::Endpoint("script exhausted".into())))
    }
}
