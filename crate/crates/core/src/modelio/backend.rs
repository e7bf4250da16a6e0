//! Chat-completions transport and the prompt-driven role implementations.

use std::sync::Arc;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::grammar::{parse_order_reply, parse_query_reply, parse_rewrite_reply, parse_score_reply, OrderVerdict, ScoreJudgment};
use super::prompt::{PromptTemplate, Slot, SlotValues};
use super::roles::{PairwiseJudge, QueryModel, ReasoningModel, Rewriter, ScoreModel};
use super::{EndpointConfig, ModelError, RetryPolicy};
use crate::corpus::{Document, Query, RelevanceLabel};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ChatRole {
    System,
    User,
    Assistant,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChatMessage {
    pub role: ChatRole,
    pub content: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatRequest {
    pub model: String,
    pub messages: Vec<ChatMessage>,
    pub temperature: f64,
}

#[derive(Debug, Deserialize)]
struct ChatResponse {
    choices: Vec<ChatChoice>,
}

#[derive(Debug, Deserialize)]
struct ChatChoice {
    message: ChatResponseMessage,
}

#[derive(Debug, Deserialize)]
struct ChatResponseMessage {
    #[serde(default)]
    content: Option<String>,
}

/// Anything that turns a chat request into the assistant's reply text.
pub trait ChatBackend: Send + Sync {
    fn complete(&self, request: &ChatRequest) -> Result<String, ModelError>;
}

/// `POST {base_url}/v1/chat/completions` with an optional bearer token.
pub struct HttpChatBackend {
    agent: ureq::Agent,
    url: String,
    api_key: Option<String>,
}

impl HttpChatBackend {
    pub fn new(config: &EndpointConfig) -> Result<Self, ModelError> {
        config.validate()?;
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .timeout_global(Some(Duration::from_millis(config.timeout_ms)))
            .build()
            .into();
        Ok(HttpChatBackend {
            agent,
            url: format!("{}/v1/chat/completions", config.base_url.trim_end_matches('/')),
            api_key: config.api_key.clone(),
        })
    }

    pub fn url(&self) -> &str {
        &self.url
    }
}

impl ChatBackend for HttpChatBackend {
    fn complete(&self, request: &ChatRequest) -> Result<String, ModelError> {
        let mut call = self.agent.post(&self.url).header("Content-Type", "application/json");
        if let Some(key) = &self.api_key {
            call = call.header("Authorization", &format!("Bearer {key}"));
        }
        let mut response = call.send_json(request).map_err(|e| ModelError::Endpoint(format!("{}: {e}", self.url)))?;
        let body: ChatResponse = response
            .body_mut()
            .read_json()
            .map_err(|e| ModelError::Endpoint(format!("{}: bad response body: {e}", self.url)))?;
        body.choices
            .into_iter()
            .next()
            .and_then(|c| c.message.content)
            .ok_or_else(|| ModelError::Endpoint(format!("{}: response has no assistant content", self.url)))
    }
}

/// A prompt template bound to a backend, with retries over transport and
/// parse failures.
#[derive(Clone)]
pub struct PromptedModel {
    backend: Arc<dyn ChatBackend>,
    template: PromptTemplate,
    model_name: String,
    temperature: f64,
    retry: RetryPolicy,
    system: Option<String>,
}

impl PromptedModel {
    pub fn new(backend: Arc<dyn ChatBackend>, template: PromptTemplate, config: &EndpointConfig) -> Self {
        PromptedModel {
            backend,
            template,
            model_name: config.model_name.clone(),
            temperature: config.temperature,
            retry: config.retry,
            system: None,
        }
    }

    pub fn with_system(mut self, system: impl Into<String>) -> Self {
        self.system = Some(system.into());
        self
    }

    pub fn template(&self) -> &PromptTemplate {
        &self.template
    }

    pub fn request(&self, slots: &SlotValues<'_>) -> Result<ChatRequest, ModelError> {
        let prompt = self.template.render(slots)?;
        let mut messages = Vec::with_capacity(2);
        if let Some(system) = &self.system {
            messages.push(ChatMessage {
                role: ChatRole::System,
                content: system.clone(),
            });
        }
        messages.push(ChatMessage {
            role: ChatRole::User,
            content: prompt,
        });
        Ok(ChatRequest {
            model: self.model_name.clone(),
            messages,
            temperature: self.temperature,
        })
    }

    pub fn ask<T>(&self, slots: &SlotValues<'_>, parse: impl Fn(&str) -> Result<T, ModelError>) -> Result<T, ModelError> {
        let request = self.request(slots)?;
        self.retry.run(|_| {
            let reply = self.backend.complete(&request)?;
            parse(&reply)
        })
    }
}

fn doc_slots<'a>(doc: &'a Document) -> SlotValues<'a> {
    SlotValues::from([(Slot::Title, doc.title.as_str()), (Slot::Body, doc.body.as_str())])
}

pub struct LlmScorer(pub PromptedModel);

impl ScoreModel for LlmScorer {
    fn score(&self, query: &Query, doc: &Document) -> Result<ScoreJudgment, ModelError> {
        let mut slots = doc_slots(doc);
        slots.insert(Slot::Query, &query.text);
        self.0.ask(&slots, parse_score_reply)
    }
}

pub struct LlmQueryGenerator(pub PromptedModel);

impl QueryModel for LlmQueryGenerator {
    fn generate(&self, doc: &Document, target: RelevanceLabel, _sample: usize) -> Result<String, ModelError> {
        let label = target.to_string();
        let mut slots = doc_slots(doc);
        slots.insert(Slot::TargetLabel, &label);
        self.0.ask(&slots, parse_query_reply)
    }
}

pub struct LlmJudge(pub PromptedModel);

impl PairwiseJudge for LlmJudge {
    fn judge(&self, doc: &Document, query_a: &Query, query_b: &Query) -> Result<OrderVerdict, ModelError> {
        let mut slots = doc_slots(doc);
        slots.insert(Slot::QueryA, &query_a.text);
        slots.insert(Slot::QueryB, &query_b.text);
        self.0.ask(&slots, parse_order_reply)
    }
}

pub struct LlmRewriter(pub PromptedModel);

impl Rewriter for LlmRewriter {
    fn rewrite(&self, ocr: &str, asr: &str) -> Result<Option<String>, ModelError> {
        let slots = SlotValues::from([(Slot::Ocr, ocr), (Slot::Asr, asr)]);
        self.0.ask(&slots, |reply| Ok(parse_rewrite_reply(reply)))
    }
}

/// Reasoning chains must conclude with the label they were asked to justify.
pub struct LlmReasoner(pub PromptedModel);

impl ReasoningModel for LlmReasoner {
    fn explain(&self, query: &Query, doc: &Document, label: RelevanceLabel) -> Result<String, ModelError> {
        let label_text = label.to_string();
        let mut slots = doc_slots(doc);
        slots.insert(Slot::Query, &query.text);
        slots.insert(Slot::Label, &label_text);
        self.0.ask(&slots, |reply| {
            let judgment = parse_score_reply(reply)?;
            match judgment.rationale {
                Some(rationale) if judgment.label == label => Ok(rationale),
                _ => Err(ModelError::ScoreParse { raw: reply.to_string() }),
            }
        })
    }
}
