//! The named stages of a run. Each stage declares its inputs and the config
//! that shapes its outputs, then hands a body to [`Workdir::run_stage`].

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::config::{role_name, PipelineConfig};
use super::manifest::{sha256_hex, StageCounts, StageManifest};
use super::workdir::{Input, StageOutcome, StagePlan, StageStatus, Workdir};
use super::PipelineError;
use crate::audit::{FilterDecision, Verdict};
use crate::corpus::io::read_jsonl_file;
use crate::corpus::{
    assemble_document, compute_stats, load_corpus, load_documents, make_balanced_testset, make_binary_subset, partition_dedup, save_documents,
    Corpus, DocumentTable, LengthUnit, RawItem, RelevanceLabel, Schema,
};
use crate::loss::{frobenius, weighted_infonce, EmbeddingBatch, Similarity};
use crate::metrics::{
    consistency_rate, duplicate_rate, ndcg_at_k, pair_classification, relative_decrease_exact_pct, relative_decrease_pct, relative_improvement,
    MetricError, NdcgOptions, Qrels, RunRanking, REPORT_SCHEMA_VERSION,
};
use crate::modelio::mock::{MockReasoner, MockRewriter, OverlapJudge, OverlapQueryGenerator, OverlapScorer};
use crate::modelio::prompt::defaults;
use crate::modelio::{
    collect_reasoning_chains, rewrite_item, run_batch, EndpointConfig, HttpChatBackend, LlmJudge, LlmQueryGenerator, LlmReasoner, LlmRewriter,
    LlmScorer, ModelRole, OutputGrammar, PairwiseJudge, PromptTemplate, PromptedModel, QueryModel, ReasoningModel, Rewriter, ScoreModel,
};
use crate::stage1::{run_stage1, Stage1Options};
use crate::stage2::{assemble_enriched, filter_by_score, filter_pairwise, synthesize, SynthesisPlan};
use crate::util::round_half_even;

pub const INGEST: &str = "ingest";
pub const REWRITE: &str = "rewrite";
pub const STATS: &str = "stats";
pub const DEDUP: &str = "dedup";
pub const STAGE1: &str = "stage1";
pub const SYNTH: &str = "synth";
pub const FILTER_SCORE: &str = "filter-score";
pub const FILTER_PAIRWISE: &str = "filter-pairwise";
pub const ASSEMBLE: &str = "assemble";
pub const EVAL_RETRIEVAL: &str = "eval-retrieval";
pub const EVAL_PAIRCLASS: &str = "eval-pairclass";
pub const DIVERSITY: &str = "diversity";
pub const CONSISTENCY: &str = "consistency";
pub const LOSS_CHECK: &str = "loss-check";
pub const REASONING: &str = "reasoning";

pub const OUTPUT: &str = "output.jsonl";
pub const DECISIONS: &str = "decisions.jsonl";

/// Stage order used when listing and reporting.
pub const STAGE_ORDER: [&str; 15] = [
    REWRITE,
    INGEST,
    STATS,
    DEDUP,
    STAGE1,
    SYNTH,
    FILTER_SCORE,
    FILTER_PAIRWISE,
    ASSEMBLE,
    REASONING,
    DIVERSITY,
    CONSISTENCY,
    EVAL_RETRIEVAL,
    EVAL_PAIRCLASS,
    LOSS_CHECK,
];

/// Result line of one stage invocation.
#[derive(Debug, Clone, Serialize)]
pub struct StageRun {
    pub stage: String,
    pub status: StageStatus,
    pub counts: StageCounts,
}

impl From<(StageStatus, StageManifest)> for StageRun {
    fn from((status, manifest): (StageStatus, StageManifest)) -> Self {
        StageRun {
            stage: manifest.stage,
            status,
            counts: manifest.counts,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SubsetKind {
    Binary,
    Balanced,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QueryFileFormat {
    /// `.jsonl` is read as a corpus, anything else as one query per line.
    #[default]
    Auto,
    Text,
    Corpus,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AnnotationFormat {
    /// `.tsv` is read as `target\tjudged`, anything else as a decisions log.
    #[default]
    Auto,
    Tsv,
    Decisions,
}

/// A loss-check input document; the temperature falls back to the config.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct LossCheckInput {
    queries: Vec<Vec<f64>>,
    documents: Vec<Vec<f64>>,
    labels: Vec<RelevanceLabel>,
    #[serde(default)]
    temperature: Option<f64>,
    #[serde(default)]
    hard_negatives: Vec<Vec<Vec<f64>>>,
    #[serde(default)]
    similarity: Similarity,
}

/// A configured run bound to a workdir.
pub struct Pipeline {
    pub config: PipelineConfig,
    pub workdir: Workdir,
    pub mock: bool,
    pub seed: u64,
    pub concurrency: Option<usize>,
    pub force: bool,
}

fn default_grammar(role: ModelRole) -> OutputGrammar {
    match role {
        ModelRole::Score => OutputGrammar::ScoreLine,
        ModelRole::Query => OutputGrammar::PlainQuery,
        ModelRole::Judge => OutputGrammar::OrderToken,
        ModelRole::Rewrite => OutputGrammar::RewriteText,
        ModelRole::Reasoning => OutputGrammar::ReasoningThenScore,
    }
}

fn counts(n_in: usize, n_out: usize, n_dropped: usize) -> StageCounts {
    StageCounts { n_in, n_out, n_dropped }
}

fn to_value<T: Serialize>(value: &T) -> Value {
    serde_json::to_value(value).expect("report types serialize")
}

fn read_queries(path: &Path, format: QueryFileFormat) -> Result<Vec<String>, PipelineError> {
    let as_corpus = match format {
        QueryFileFormat::Auto => path.extension().is_some_and(|e| e == "jsonl"),
        QueryFileFormat::Text => false,
        QueryFileFormat::Corpus => true,
    };
    if as_corpus {
        let corpus = load_corpus(path, Schema::Mixed)?;
        return Ok(corpus.into_records().into_iter().map(|r| r.query.text).collect());
    }
    let text = std::fs::read_to_string(path).map_err(PipelineError::io(path))?;
    Ok(text.lines().map(str::trim).filter(|l| !l.is_empty()).map(String::from).collect())
}

fn read_annotations(path: &Path, format: AnnotationFormat) -> Result<Vec<(RelevanceLabel, RelevanceLabel)>, PipelineError> {
    let tsv = match format {
        AnnotationFormat::Auto => path.extension().is_some_and(|e| e == "tsv"),
        AnnotationFormat::Tsv => true,
        AnnotationFormat::Decisions => false,
    };
    if !tsv {
        let decisions: Vec<FilterDecision> = read_jsonl_file(path)?;
        return Ok(decisions
            .into_iter()
            .filter_map(|d| Some((d.detail.target_label?, d.detail.predicted_label?)))
            .collect());
    }
    let text = std::fs::read_to_string(path).map_err(PipelineError::io(path))?;
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let parse_err = |message: String| MetricError::Parse {
            path: path.to_path_buf(),
            line: i + 1,
            message,
        };
        let cols: Vec<&str> = line.split('\t').collect();
        if cols.len() != 2 {
            return Err(parse_err(format!("expected 2 tab-separated columns, got {}", cols.len())).into());
        }
        let label = |s: &str| s.trim().parse::<RelevanceLabel>().map_err(|e| parse_err(e.to_string()));
        out.push((label(cols[0])?, label(cols[1])?));
    }
    Ok(out)
}

fn decision_drops(decisions: &[FilterDecision]) -> usize {
    decisions.iter().filter(|d| d.verdict.is_drop()).count()
}

impl Pipeline {
    fn max_concurrency(&self, role: ModelRole) -> usize {
        self.concurrency.unwrap_or_else(|| {
            if self.mock {
                self.config.max_concurrency
            } else {
                self.config
                    .endpoints
                    .get(&role)
                    .map_or(self.config.max_concurrency, |e| e.max_concurrency)
            }
        })
    }

    fn endpoint(&self, role: ModelRole) -> Result<EndpointConfig, PipelineError> {
        let mut endpoint = self.config.endpoints.get(&role).cloned().ok_or_else(|| {
            PipelineError::Config(format!(
                "no endpoint configured for role {:?}; add endpoints.{} or pass --mock",
                role_name(role),
                role_name(role)
            ))
        })?;
        endpoint.apply_process_env();
        endpoint
            .validate()
            .map_err(|e| PipelineError::Config(format!("endpoints.{}: {e}", role_name(role))))?;
        Ok(endpoint)
    }

    fn template(&self, role: ModelRole) -> Result<PromptTemplate, PipelineError> {
        match self.config.prompts.get(&role) {
            Some(path) => PromptTemplate::load(path, Some(default_grammar(role)))
                .map_err(|e| PipelineError::Config(format!("prompts.{}: {e}", role_name(role)))),
            None => Ok(match role {
                ModelRole::Score => defaults::score(),
                ModelRole::Query => defaults::query(),
                ModelRole::Judge => defaults::judge(),
                ModelRole::Rewrite => defaults::rewrite(),
                ModelRole::Reasoning => defaults::reasoning(),
            }),
        }
    }

    fn prompted(&self, role: ModelRole) -> Result<PromptedModel, PipelineError> {
        let endpoint = self.endpoint(role)?;
        let backend = Arc::new(HttpChatBackend::new(&endpoint)?);
        Ok(PromptedModel::new(backend, self.template(role)?, &endpoint))
    }

    /// What about a model can change a stage's outputs.
    fn model_snapshot(&self, role: ModelRole) -> Result<Value, PipelineError> {
        if self.mock {
            return Ok(json!({"mock": true, "seed": self.seed, "settings": self.config.mock}));
        }
        let endpoint = self.endpoint(role)?;
        let template = self.template(role)?;
        Ok(json!({
            "mock": false,
            "endpoint": endpoint,
            "prompt_sha256": sha256_hex(template.body().as_bytes()),
        }))
    }

    fn scorer(&self) -> Result<Box<dyn ScoreModel>, PipelineError> {
        if self.mock {
            return Ok(Box::new(OverlapScorer::with_noise(self.seed, self.config.mock.score_noise)));
        }
        Ok(Box::new(LlmScorer(self.prompted(ModelRole::Score)?)))
    }

    fn query_model(&self) -> Result<Box<dyn QueryModel>, PipelineError> {
        if self.mock {
            return Ok(Box::new(OverlapQueryGenerator::new(self.seed, self.config.mock.misfire_rate)));
        }
        Ok(Box::new(LlmQueryGenerator(self.prompted(ModelRole::Query)?)))
    }

    fn judge(&self) -> Result<Box<dyn PairwiseJudge>, PipelineError> {
        if self.mock {
            return Ok(Box::new(OverlapJudge::new(self.seed, self.config.mock.inversion_rate)));
        }
        Ok(Box::new(LlmJudge(self.prompted(ModelRole::Judge)?)))
    }

    fn rewriter(&self) -> Result<Box<dyn Rewriter>, PipelineError> {
        if self.mock {
            return Ok(Box::new(MockRewriter::with_fail_rate(self.seed, self.config.mock.rewrite_fail_rate)));
        }
        Ok(Box::new(LlmRewriter(self.prompted(ModelRole::Rewrite)?)))
    }

    fn reasoner(&self) -> Result<Box<dyn ReasoningModel>, PipelineError> {
        if self.mock {
            return Ok(Box::new(MockReasoner::new()));
        }
        Ok(Box::new(LlmReasoner(self.prompted(ModelRole::Reasoning)?)))
    }

    fn required_path(&self, value: &Option<PathBuf>, name: &str) -> Result<PathBuf, PipelineError> {
        value.clone().ok_or_else(|| PipelineError::Config(format!("{name} is not set")))
    }

    fn run(
        &self,
        name: &str,
        inputs: Vec<Input>,
        config: Value,
        body: impl FnOnce(&super::workdir::StageContext) -> Result<StageOutcome, PipelineError>,
    ) -> Result<StageRun, PipelineError> {
        let plan = StagePlan {
            name: name.to_string(),
            inputs,
            config,
        };
        Ok(self.workdir.run_stage(plan, self.force, body)?.into())
    }

    /// Where ingest takes documents from: `paths.docs`, else the rewrite
    /// stage's output.
    fn docs_input(&self) -> Result<Input, PipelineError> {
        if let Some(docs) = &self.config.paths.docs {
            Ok(Input::external("docs", docs))
        } else if self.config.paths.raw_items.is_some() {
            Ok(Input::upstream(REWRITE, OUTPUT))
        } else {
            Err(PipelineError::Config("neither paths.docs nor paths.raw_items is set".into()))
        }
    }

    pub fn rewrite(&self) -> Result<StageRun, PipelineError> {
        let raw_path = self.required_path(&self.config.paths.raw_items, "paths.raw_items")?;
        let config = json!({"model": self.model_snapshot(ModelRole::Rewrite)?});
        let rewriter = self.rewriter()?;
        let concurrency = self.max_concurrency(ModelRole::Rewrite);
        self.run(REWRITE, vec![Input::external("raw_items", raw_path)], config, |ctx| {
            let items: Vec<RawItem> = read_jsonl_file(ctx.input("raw_items"))?;
            let results = run_batch(&items, concurrency, |item| {
                if item.rewritten.is_some() {
                    return Ok(item.rewritten.clone());
                }
                rewrite_item(rewriter.as_ref(), item.ocr.as_deref().unwrap_or(""), item.asr.as_deref().unwrap_or(""))
            });
            let mut table = DocumentTable::new();
            let (mut n_rewritten, mut n_fallback) = (0, 0);
            let mut failures = Vec::new();
            for (item, result) in items.iter().zip(results) {
                let rewritten = match result {
                    Ok(r) => r,
                    Err(e) => {
                        failures.push(json!({"doc_id": item.doc_id, "kind": e.kind(), "message": e.to_string()}));
                        None
                    }
                };
                match assemble_document(&item.doc_id, &item.title, item.ocr.as_deref(), item.asr.as_deref(), rewritten.as_deref()) {
                    Ok(doc) => {
                        if rewritten.is_some() {
                            n_rewritten += 1;
                        } else {
                            n_fallback += 1;
                        }
                        table.insert(doc)?;
                    }
                    Err(e) => failures.push(json!({"doc_id": item.doc_id, "kind": "dropped", "message": e.to_string()})),
                }
            }
            save_documents(&table, &ctx.output_path(OUTPUT))?;
            let n_dropped = items.len() - n_rewritten - n_fallback;
            Ok(StageOutcome {
                counts: counts(items.len(), table.len(), n_dropped),
                report: json!({
                    "n_items": items.len(),
                    "n_rewritten": n_rewritten,
                    "n_fallback": n_fallback,
                    "n_dropped": n_dropped,
                    "failures": failures,
                }),
            })
        })
    }

    pub fn ingest(&self) -> Result<StageRun, PipelineError> {
        let labeled = self.required_path(&self.config.paths.labeled, "paths.labeled")?;
        let docs_input = self.docs_input()?;
        let docs_key = docs_input.key();
        let mut inputs = vec![Input::external("labeled", labeled), docs_input];
        if let Some(unlabeled) = &self.config.paths.unlabeled {
            inputs.push(Input::external("unlabeled", unlabeled));
        }
        self.run(INGEST, inputs, json!({}), |ctx| {
            let labeled = load_corpus(ctx.input("labeled"), Schema::Labeled)?;
            let unlabeled = if ctx.has_input("unlabeled") {
                load_corpus(ctx.input("unlabeled"), Schema::Unlabeled)?
            } else {
                Corpus::default()
            };
            let docs = load_documents(ctx.input(&docs_key))?;
            let unknown = labeled.iter().chain(unlabeled.iter()).filter(|r| !docs.contains(&r.doc_id)).count();
            ctx.write_corpus("labeled.jsonl", &labeled)?;
            ctx.write_corpus("unlabeled.jsonl", &unlabeled)?;
            save_documents(&docs, &ctx.output_path("docs.jsonl"))?;
            let n = labeled.len() + unlabeled.len();
            Ok(StageOutcome {
                counts: counts(n, n, 0),
                report: json!({
                    "n_labeled": labeled.len(),
                    "n_unlabeled": unlabeled.len(),
                    "n_docs": docs.len(),
                    "n_records_with_unknown_doc": unknown,
                }),
            })
        })
    }

    pub fn stats(&self, input: Option<&Path>, docs: Option<&Path>, unit: Option<LengthUnit>) -> Result<StageRun, PipelineError> {
        let unit = unit.unwrap_or(self.config.length_unit);
        let mut inputs = vec![match input {
            Some(p) => Input::external("corpus", p),
            None => Input::upstream(INGEST, "labeled.jsonl"),
        }];
        match (docs, input) {
            (Some(d), _) => inputs.push(Input::external("docs", d)),
            (None, None) => inputs.push(Input::upstream(INGEST, "docs.jsonl")),
            (None, Some(_)) => {}
        }
        let corpus_key = inputs[0].key();
        let docs_key = inputs.get(1).map(Input::key);
        self.run(STATS, inputs, json!({"length_unit": unit}), |ctx| {
            let corpus = load_corpus(ctx.input(&corpus_key), Schema::Mixed)?;
            let docs = docs_key.map(|k| load_documents(ctx.input(&k))).transpose()?;
            let stats = compute_stats(&corpus, docs.as_ref(), unit);
            Ok(StageOutcome {
                counts: counts(stats.size, stats.size, 0),
                report: json!({
                    "schema_version": REPORT_SCHEMA_VERSION,
                    "stats": stats,
                    "label_proportions_pct": stats.rounded_proportions(),
                }),
            })
        })
    }

    pub fn dedup(&self) -> Result<StageRun, PipelineError> {
        self.run(DEDUP, vec![Input::upstream(INGEST, "labeled.jsonl")], json!({}), |ctx| {
            let labeled = load_corpus(ctx.input("ingest/labeled.jsonl"), Schema::Labeled)?;
            let (kept, dropped) = partition_dedup(&labeled);
            let decisions: Vec<_> = dropped.iter().map(|r| FilterDecision::for_record(r, Verdict::DroppedDuplicate)).collect();
            ctx.write_corpus(OUTPUT, &kept)?;
            ctx.write_jsonl(DECISIONS, &decisions)?;
            Ok(StageOutcome {
                counts: counts(labeled.len(), kept.len(), dropped.len()),
                report: json!({"n_in": labeled.len(), "n_out": kept.len(), "n_duplicates": dropped.len()}),
            })
        })
    }

    pub fn stage1(&self) -> Result<StageRun, PipelineError> {
        let options = Stage1Options {
            keep_zero_labels: self.config.stage1.keep_zero_labels,
            max_concurrency: self.max_concurrency(ModelRole::Score),
        };
        let config = json!({
            "keep_zero_labels": options.keep_zero_labels,
            "model": self.model_snapshot(ModelRole::Score)?,
        });
        let scorer = self.scorer()?;
        let inputs = vec![
            Input::upstream(DEDUP, OUTPUT),
            Input::upstream(INGEST, "unlabeled.jsonl"),
            Input::upstream(INGEST, "docs.jsonl"),
        ];
        self.run(STAGE1, inputs, config, |ctx| {
            let labeled = load_corpus(ctx.input("dedup/output.jsonl"), Schema::Labeled)?;
            let unlabeled = load_corpus(ctx.input("ingest/unlabeled.jsonl"), Schema::Unlabeled)?;
            let docs = load_documents(ctx.input("ingest/docs.jsonl"))?;
            let out = run_stage1(&labeled, &unlabeled, &docs, scorer.as_ref(), options);
            ctx.write_corpus(OUTPUT, &out.merged_corpus)?;
            ctx.write_jsonl("d2q.jsonl", &out.d2q)?;
            ctx.write_jsonl(DECISIONS, &out.decisions)?;
            Ok(StageOutcome {
                counts: counts(
                    out.report.n_annotated_in + out.report.n_unlabeled_in,
                    out.merged_corpus.len(),
                    out.decisions.len(),
                ),
                report: to_value(&out.report),
            })
        })
    }

    pub fn synth(&self) -> Result<StageRun, PipelineError> {
        let settings = self.config.synthesis.clone();
        let config = json!({"synthesis": settings, "model": self.model_snapshot(ModelRole::Query)?});
        let generator = self.query_model()?;
        let concurrency = self.max_concurrency(ModelRole::Query);
        self.run(SYNTH, vec![Input::upstream(INGEST, "docs.jsonl")], config, |ctx| {
            let docs = load_documents(ctx.input("ingest/docs.jsonl"))?;
            let mut doc_ids = settings
                .doc_ids
                .clone()
                .unwrap_or_else(|| docs.iter().map(|d| d.doc_id.clone()).collect());
            if let Some(max) = settings.max_docs {
                doc_ids.truncate(max);
            }
            let plan = SynthesisPlan {
                doc_ids,
                target_labels: settings.target_labels.clone(),
                per_doc_per_label: settings.per_doc_per_label,
            };
            let out = synthesize(&plan, &docs, generator.as_ref(), concurrency)?;
            ctx.write_corpus(OUTPUT, &out.corpus)?;
            ctx.write_jsonl(DECISIONS, &out.failures)?;
            Ok(StageOutcome {
                counts: counts(plan.n_slots(), out.corpus.len(), out.failures.len()),
                report: json!({
                    "n_docs": plan.doc_ids.len(),
                    "target_labels": plan.target_labels,
                    "per_doc_per_label": plan.per_doc_per_label,
                    "n_slots": plan.n_slots(),
                    "n_generated": out.corpus.len(),
                    "n_failed": out.failures.len(),
                }),
            })
        })
    }

    pub fn filter_score(&self) -> Result<StageRun, PipelineError> {
        let config = json!({"model": self.model_snapshot(ModelRole::Score)?});
        let scorer = self.scorer()?;
        let concurrency = self.max_concurrency(ModelRole::Score);
        let inputs = vec![Input::upstream(SYNTH, OUTPUT), Input::upstream(INGEST, "docs.jsonl")];
        self.run(FILTER_SCORE, inputs, config, |ctx| {
            let corpus = load_corpus(ctx.input("synth/output.jsonl"), Schema::Labeled)?;
            let docs = load_documents(ctx.input("ingest/docs.jsonl"))?;
            let out = filter_by_score(&corpus, &docs, scorer.as_ref(), concurrency)?;
            let annotations: Vec<_> = out
                .decisions
                .iter()
                .filter_map(|d| Some((d.detail.target_label?, d.detail.predicted_label?)))
                .collect();
            ctx.write_corpus(OUTPUT, &out.kept)?;
            ctx.write_jsonl(DECISIONS, &out.decisions)?;
            let dropped = decision_drops(&out.decisions);
            Ok(StageOutcome {
                counts: counts(corpus.len(), out.kept.len(), dropped),
                report: json!({
                    "n_in": corpus.len(),
                    "n_kept": out.kept.len(),
                    "n_dropped": dropped,
                    "n_score_errors": out.decisions.iter().filter(|d| d.detail.error.is_some()).count(),
                    "consistency": consistency_rate(&annotations),
                }),
            })
        })
    }

    pub fn filter_pairwise(&self) -> Result<StageRun, PipelineError> {
        let config = json!({"model": self.model_snapshot(ModelRole::Judge)?});
        let judge = self.judge()?;
        let concurrency = self.max_concurrency(ModelRole::Judge);
        let inputs = vec![Input::upstream(FILTER_SCORE, OUTPUT), Input::upstream(INGEST, "docs.jsonl")];
        self.run(FILTER_PAIRWISE, inputs, config, |ctx| {
            let corpus = load_corpus(ctx.input("filter-score/output.jsonl"), Schema::Labeled)?;
            let docs = load_documents(ctx.input("ingest/docs.jsonl"))?;
            let out = filter_pairwise(&corpus, &docs, judge.as_ref(), concurrency)?;
            ctx.write_corpus(OUTPUT, &out.refined)?;
            ctx.write_jsonl(DECISIONS, &out.decisions)?;
            ctx.write_jsonl("judgments.jsonl", &out.judgments)?;
            let dropped = decision_drops(&out.decisions);
            Ok(StageOutcome {
                counts: counts(corpus.len(), out.refined.len(), dropped),
                report: json!({
                    "n_in": corpus.len(),
                    "n_kept": out.refined.len(),
                    "n_dropped": dropped,
                    "n_pairs_judged": out.judgments.len(),
                    "n_inconsistent_pairs": out.judgments.iter().filter(|j| !j.consistent).count(),
                    "n_judge_errors": out.judgments.iter().filter(|j| j.error.is_some()).count(),
                }),
            })
        })
    }

    pub fn assemble(&self) -> Result<StageRun, PipelineError> {
        let inputs = vec![Input::upstream(FILTER_PAIRWISE, OUTPUT), Input::upstream(STAGE1, OUTPUT)];
        self.run(ASSEMBLE, inputs, json!({}), |ctx| {
            let refined = load_corpus(ctx.input("filter-pairwise/output.jsonl"), Schema::Labeled)?;
            let stage1 = load_corpus(ctx.input("stage1/output.jsonl"), Schema::Labeled)?;
            let (enriched, dropped) = assemble_enriched(&refined, &stage1);
            let decisions: Vec<_> = dropped.iter().map(|r| FilterDecision::for_record(r, Verdict::DroppedDuplicate)).collect();
            let mut by_provenance: BTreeMap<&str, usize> = BTreeMap::new();
            for r in &enriched {
                *by_provenance.entry(r.provenance.as_str()).or_default() += 1;
            }
            ctx.write_corpus(OUTPUT, &enriched)?;
            ctx.write_jsonl(DECISIONS, &decisions)?;
            Ok(StageOutcome {
                counts: counts(refined.len() + stage1.len(), enriched.len(), dropped.len()),
                report: json!({
                    "n_stage1": stage1.len(),
                    "n_refined": refined.len(),
                    "n_out": enriched.len(),
                    "n_duplicates_dropped": dropped.len(),
                    "label_counts": enriched.label_counts(),
                    "by_provenance": by_provenance,
                }),
            })
        })
    }

    pub fn subset(&self, kind: SubsetKind, input: Option<&Path>, n_per_label: Option<usize>) -> Result<StageRun, PipelineError> {
        let input = match input {
            Some(p) => Input::external("corpus", p),
            None => Input::upstream(INGEST, "labeled.jsonl"),
        };
        let key = input.key();
        let n = n_per_label.unwrap_or(self.config.subset.n_per_label);
        let (name, config) = match kind {
            SubsetKind::Binary => ("subset-binary", json!({})),
            SubsetKind::Balanced => ("subset-balanced", json!({"n_per_label": n, "seed": self.seed})),
        };
        let seed = self.seed;
        self.run(name, vec![input], config, |ctx| {
            let corpus = load_corpus(ctx.input(&key), Schema::Labeled)?;
            let subset = match kind {
                SubsetKind::Binary => make_binary_subset(&corpus),
                SubsetKind::Balanced => make_balanced_testset(&corpus, n, seed)?,
            };
            ctx.write_corpus(OUTPUT, &subset)?;
            Ok(StageOutcome {
                counts: counts(corpus.len(), subset.len(), corpus.len() - subset.len()),
                report: json!({"kind": kind, "n_in": corpus.len(), "n_out": subset.len(), "label_counts": subset.label_counts()}),
            })
        })
    }

    fn qrels_and_run(&self, qrels: Option<&Path>, run: Option<&Path>) -> Result<Vec<Input>, PipelineError> {
        let qrels = qrels
            .map(Path::to_path_buf)
            .or_else(|| self.config.eval.qrels.clone())
            .ok_or_else(|| PipelineError::Config("no qrels file (--qrels or eval.qrels)".into()))?;
        let run = run
            .map(Path::to_path_buf)
            .or_else(|| self.config.eval.run.clone())
            .ok_or_else(|| PipelineError::Config("no run file (--run or eval.run)".into()))?;
        Ok(vec![Input::external("qrels", qrels), Input::external("run", run)])
    }

    pub fn eval_retrieval(&self, qrels: Option<&Path>, run: Option<&Path>, k: Option<usize>) -> Result<StageRun, PipelineError> {
        let inputs = self.qrels_and_run(qrels, run)?;
        let k = k.unwrap_or(self.config.eval.k);
        if k == 0 {
            return Err(PipelineError::Config("k must be >= 1".into()));
        }
        let options = NdcgOptions {
            gain: self.config.eval.gain,
            unjudged: self.config.eval.unjudged,
            zero_queries: self.config.eval.zero_queries,
        };
        self.run(EVAL_RETRIEVAL, inputs, json!({"k": k, "options": options}), |ctx| {
            let qrels = Qrels::load(ctx.input("qrels"))?;
            let run = RunRanking::load(ctx.input("run"))?;
            let result = ndcg_at_k(&qrels, &run, k, options)?;
            Ok(StageOutcome {
                counts: counts(run.len(), result.per_query.len(), 0),
                report: json!({
                    "schema_version": REPORT_SCHEMA_VERSION,
                    "metric": format!("ndcg@{k}"),
                    "mean_pct": result.mean.map(|m| round_half_even(100.0 * m, 2)),
                    "result": result,
                }),
            })
        })
    }

    pub fn eval_pairclass(&self, qrels: Option<&Path>, run: Option<&Path>) -> Result<StageRun, PipelineError> {
        let inputs = self.qrels_and_run(qrels, run)?;
        self.run(EVAL_PAIRCLASS, inputs, json!({}), |ctx| {
            let qrels = Qrels::load(ctx.input("qrels"))?;
            let run = RunRanking::load(ctx.input("run"))?;
            let mut pairs = Vec::new();
            for (query_id, ranking) in run.iter() {
                for (doc_id, score) in ranking {
                    let label = qrels.label(query_id, doc_id).ok_or_else(|| MetricError::MissingLabel {
                        query_id: query_id.to_string(),
                        doc_id: doc_id.clone(),
                    })?;
                    pairs.push((*score, label));
                }
            }
            let report = pair_classification(&pairs)?;
            Ok(StageOutcome {
                counts: counts(pairs.len(), pairs.len(), 0),
                report: json!({
                    "schema_version": REPORT_SCHEMA_VERSION,
                    "mean_ap_pct": round_half_even(100.0 * report.mean_ap, 2),
                    "result": report,
                }),
            })
        })
    }

    pub fn diversity(&self, input: Option<&Path>, baseline: Option<&Path>, format: QueryFileFormat) -> Result<StageRun, PipelineError> {
        let mut inputs = vec![match input {
            Some(p) => Input::external("queries", p),
            None => Input::upstream(SYNTH, OUTPUT),
        }];
        if let Some(b) = baseline {
            inputs.push(Input::external("baseline", b));
        }
        let key = inputs[0].key();
        self.run(DIVERSITY, inputs, json!({"format": format}), |ctx| {
            let queries = read_queries(ctx.input(&key), format)?;
            let report = duplicate_rate(&queries);
            let mut out = json!({
                "schema_version": REPORT_SCHEMA_VERSION,
                "duplicate_rate_pct": report.duplicate_rate_pct(),
                "report": report,
            });
            if ctx.has_input("baseline") {
                let base = duplicate_rate(&read_queries(ctx.input("baseline"), format)?);
                out["baseline"] = json!({"duplicate_rate_pct": base.duplicate_rate_pct(), "report": base});
                out["relative_decrease_pct"] = json!(relative_decrease_pct(&base, &report).map(|v| round_half_even(v, 2)));
                out["relative_decrease_exact_pct"] = json!(relative_decrease_exact_pct(&base, &report));
            }
            Ok(StageOutcome {
                counts: counts(report.total, report.unique, report.total - report.unique),
                report: out,
            })
        })
    }

    pub fn consistency(&self, input: Option<&Path>, baseline: Option<&Path>, format: AnnotationFormat) -> Result<StageRun, PipelineError> {
        let mut inputs = vec![match input {
            Some(p) => Input::external("annotations", p),
            None => Input::upstream(FILTER_SCORE, DECISIONS),
        }];
        if let Some(b) = baseline {
            inputs.push(Input::external("baseline", b));
        }
        let key = inputs[0].key();
        self.run(CONSISTENCY, inputs, json!({"format": format}), |ctx| {
            let annotations = read_annotations(ctx.input(&key), format)?;
            let report = consistency_rate(&annotations);
            let pct = |r: &crate::metrics::ConsistencyReport| r.overall.rate().map(|v| round_half_even(100.0 * v, 2));
            let mut out = json!({
                "schema_version": REPORT_SCHEMA_VERSION,
                "overall_rate_pct": pct(&report),
                "report": report,
            });
            if ctx.has_input("baseline") {
                let base = consistency_rate(&read_annotations(ctx.input("baseline"), format)?);
                out["baseline"] = json!({"overall_rate_pct": pct(&base), "report": base});
                out["relative_improvement_pct"] = json!(relative_improvement(&base, &report).map(|v| round_half_even(100.0 * v, 2)));
            }
            Ok(StageOutcome {
                counts: counts(annotations.len(), report.overall.matched, annotations.len() - report.overall.matched),
                report: out,
            })
        })
    }

    pub fn loss_check(&self, input: &Path) -> Result<StageRun, PipelineError> {
        let loss = self.config.loss.clone();
        self.run(LOSS_CHECK, vec![Input::external("batch", input)], json!({"loss": loss}), |ctx| {
            let path = ctx.input("batch");
            let text = std::fs::read_to_string(path).map_err(PipelineError::io(path))?;
            let raw: LossCheckInput = serde_json::from_str(&text).map_err(|e| PipelineError::Stage(format!("{}: {e}", path.display())))?;
            let mut batch = EmbeddingBatch::new(raw.queries, raw.documents, raw.labels, raw.temperature.unwrap_or(loss.temperature));
            batch.hard_negatives = raw.hard_negatives;
            batch.similarity = raw.similarity;
            let result = weighted_infonce(&batch, |l| loss.weight.weight(l))?;
            let hard_norm = result.grad_hard_negatives.iter().map(|rows| frobenius(rows).powi(2)).sum::<f64>().sqrt();
            let n = batch.queries.len();
            Ok(StageOutcome {
                counts: counts(n, n, 0),
                report: json!({
                    "n": n,
                    "dim": batch.dim(),
                    "temperature": batch.temperature,
                    "similarity": batch.similarity,
                    "weight": loss.weight,
                    "loss": result.loss,
                    "grad_norm_queries": frobenius(&result.grad_queries),
                    "grad_norm_documents": frobenius(&result.grad_documents),
                    "grad_norm_hard_negatives": hard_norm,
                }),
            })
        })
    }

    pub fn reasoning(&self, input: Option<&Path>) -> Result<StageRun, PipelineError> {
        let corpus_input = match input {
            Some(p) => Input::external("corpus", p),
            None => Input::upstream(INGEST, "labeled.jsonl"),
        };
        let key = corpus_input.key();
        let config = json!({"model": self.model_snapshot(ModelRole::Reasoning)?});
        let reasoner = self.reasoner()?;
        let concurrency = self.max_concurrency(ModelRole::Reasoning);
        let inputs = vec![corpus_input, Input::upstream(INGEST, "docs.jsonl")];
        self.run(REASONING, inputs, config, |ctx| {
            let corpus = load_corpus(ctx.input(&key), Schema::Labeled)?;
            let docs = load_documents(ctx.input("ingest/docs.jsonl"))?;
            let mut missing = Vec::new();
            let mut items = Vec::new();
            for r in &corpus {
                match docs.get(&r.doc_id) {
                    Some(d) => items.push((r.query.clone(), d, r.label.expect("labeled schema"))),
                    None => missing.push(json!({"query_id": r.query.query_id, "doc_id": r.doc_id, "kind": "unknown_document"})),
                }
            }
            let chains = collect_reasoning_chains(reasoner.as_ref(), &items, concurrency);
            chains.save(&ctx.output_path(OUTPUT))?;
            let mut failures: Vec<Value> = chains.failures.iter().map(to_value).collect();
            failures.extend(missing);
            Ok(StageOutcome {
                counts: counts(corpus.len(), chains.records.len(), failures.len()),
                report: json!({"n_in": corpus.len(), "n_chains": chains.records.len(), "failures": failures}),
            })
        })
    }

    /// The full offline flow, in order. Evaluation against qrels runs when
    /// the config names both a qrels and a run file.
    pub fn run_all(&self) -> Result<Vec<StageRun>, PipelineError> {
        let mut runs = Vec::new();
        if self.config.paths.docs.is_none() && self.config.paths.raw_items.is_some() {
            runs.push(self.rewrite()?);
        }
        runs.push(self.ingest()?);
        runs.push(self.dedup()?);
        runs.push(self.stage1()?);
        runs.push(self.synth()?);
        runs.push(self.filter_score()?);
        runs.push(self.filter_pairwise()?);
        runs.push(self.assemble()?);
        runs.push(self.diversity(None, None, QueryFileFormat::Auto)?);
        runs.push(self.consistency(None, None, AnnotationFormat::Auto)?);
        if self.config.eval.qrels.is_some() && self.config.eval.run.is_some() {
            runs.push(self.eval_retrieval(None, None, None)?);
        }
        Ok(runs)
    }
}
