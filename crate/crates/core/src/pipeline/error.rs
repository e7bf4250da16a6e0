use std::path::PathBuf;

use crate::corpus::CorpusError;
use crate::loss::LossError;
use crate::metrics::MetricError;
use crate::modelio::ModelError;
use crate::stage2::Stage2Error;

#[derive(Debug, thiserror::Error)]
pub enum PipelineError {
    #[error("config: {0}")]
    Config(String),
    #[error("workdir {0} is locked by another run (remove the lock file if that run is dead)")]
    Locked(PathBuf),
    #[error("stage {stage:?} needs {upstream:?}, which has no manifest; run it first")]
    MissingUpstream { stage: String, upstream: String },
    #[error("{path}: digest {actual} does not match recorded {expected}")]
    DigestMismatch { path: PathBuf, expected: String, actual: String },
    #[error("corrupt manifest {path}: {message}")]
    CorruptManifest { path: PathBuf, message: String },
    #[error("no manifests in {0}")]
    NoManifests(PathBuf),
    #[error("{0}")]
    Stage(String),
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error(transparent)]
    Metric(#[from] MetricError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Stage2(#[from] Stage2Error),
    #[error(transparent)]
    Loss(#[from] LossError),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl PipelineError {
    pub(crate) fn io(path: impl Into<PathBuf>) -> impl FnOnce(std::io::Error) -> Self {
        let path = path.into();
        move |source| PipelineError::Io { path, source }
    }

    /// 2 for configuration problems, 4 for digest/staleness, 3 otherwise.
    pub fn exit_code(&self) -> i32 {
        match self {
            PipelineError::Config(_) | PipelineError::Model(ModelError::Config(_)) => 2,
            PipelineError::DigestMismatch { .. } => 4,
            _ => 3,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            PipelineError::Config(_) => "config",
            PipelineError::Locked(_) => "locked",
            PipelineError::MissingUpstream { .. } => "missing_upstream",
            PipelineError::DigestMismatch { .. } => "digest_mismatch",
            PipelineError::CorruptManifest { .. } => "corrupt_manifest",
            PipelineError::NoManifests(_) => "no_manifests",
            PipelineError::Stage(_) => "stage",
            PipelineError::Corpus(_) => "corpus",
            PipelineError::Metric(_) => "metric",
            PipelineError::Model(e) => e.kind(),
            PipelineError::Stage2(_) => "stage2",
            PipelineError::Loss(_) => "loss",
            PipelineError::Io { .. } => "io",
        }
    }

    /// Machine-readable form printed on failure.
    pub fn to_json(&self) -> serde_json::Value {
        serde_json::json!({
            "error": {
                "kind": self.kind(),
                "message": self.to_string(),
                "exit_code": self.exit_code(),
            }
        })
    }
}
