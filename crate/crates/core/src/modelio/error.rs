#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ModelError {
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("unparseable score reply: {raw:?}")]
    ScoreParse { raw: String },
    #[error("unparseable order verdict: {raw:?}")]
    JudgeParse { raw: String },
    #[error("empty or blank generation: {raw:?}")]
    Generation { raw: String },
    #[error("endpoint error: {0}")]
    Endpoint(String),
    #[error("prompt error: {0}")]
    Prompt(String),
    #[error("invalid endpoint config: {0}")]
    Config(String),
}

impl ModelError {
    /// Transport and parse failures are retried; contract violations are not.
    pub fn is_retryable(&self) -> bool {
        matches!(
            self,
            ModelError::ScoreParse { .. } | ModelError::JudgeParse { .. } | ModelError::Generation { .. } | ModelError::Endpoint(_)
        )
    }

    pub fn kind(&self) -> &'static str {
        match self {
            ModelError::Precondition(_) => "precondition",
            ModelError::ScoreParse { .. } => "score_parse",
            ModelError::JudgeParse { .. } => "judge_parse",
            ModelError::Generation { .. } => "generation",
            ModelError::Endpoint(_) => "endpoint",
            ModelError::Prompt(_) => "prompt",
            ModelError::Config(_) => "config",
        }
    }
}
