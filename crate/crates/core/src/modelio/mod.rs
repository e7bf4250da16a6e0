//! Model roles, prompt templates, transports and offline mocks.

pub mod backend;
pub mod batch;
pub mod config;
mod error;
pub mod grammar;
pub mod mock;
pub mod prompt;
pub mod reasoning;
pub mod roles;

pub use backend::{
    ChatBackend, ChatMessage, ChatRequest, ChatRole, HttpChatBackend, LlmJudge, LlmQueryGenerator, LlmReasoner, LlmRewriter, LlmScorer, PromptedModel,
};
pub use batch::run_batch;
pub use config::{EndpointConfig, ModelRole, RetryPolicy, ENV_API_KEY, ENV_BASE_URL};
pub use error::ModelError;
pub use grammar::{OrderVerdict, ScoreJudgment, CANNOT_REWRITE};
pub use prompt::{OutputGrammar, PromptTemplate, Slot, SlotValues};
pub use reasoning::{collect_reasoning_chains, ReasoningChains, ReasoningFailure, ReasoningRecord};
pub use roles::{generate_query, judge_order, rewrite_item, score, PairwiseJudge, QueryModel, ReasoningModel, Rewriter, ScoreModel};
