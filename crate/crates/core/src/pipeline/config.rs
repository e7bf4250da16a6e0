use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::PipelineError;
use crate::corpus::{LengthUnit, RelevanceLabel};
use crate::loss::DEFAULT_TEMPERATURE;
use crate::metrics::{Gain, UnjudgedPolicy, ZeroQueryPolicy};
use crate::modelio::{EndpointConfig, ModelRole};

/// The single JSON document that configures a run. Every field has a
/// default; relative paths resolve against the config file's directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub paths: Paths,
    pub endpoints: BTreeMap<ModelRole, EndpointConfig>,
    /// Template file per role; the built-in defaults are used otherwise.
    pub prompts: BTreeMap<ModelRole, PathBuf>,
    pub mock: MockSettings,
    pub stage1: Stage1Settings,
    pub synthesis: SynthesisSettings,
    pub subset: SubsetSettings,
    pub eval: EvalSettings,
    pub loss: LossSettings,
    pub length_unit: LengthUnit,
    pub seed: u64,
    pub max_concurrency: usize,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            paths: Paths::default(),
            endpoints: BTreeMap::new(),
            prompts: BTreeMap::new(),
            mock: MockSettings::default(),
            stage1: Stage1Settings::default(),
            synthesis: SynthesisSettings::default(),
            subset: SubsetSettings::default(),
            eval: EvalSettings::default(),
            loss: LossSettings::default(),
            length_unit: LengthUnit::default(),
            seed: 0,
            max_concurrency: 8,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Paths {
    pub labeled: Option<PathBuf>,
    pub unlabeled: Option<PathBuf>,
    pub docs: Option<PathBuf>,
    /// Raw OCR/ASR items for the `rewrite` stage.
    pub raw_items: Option<PathBuf>,
    pub workdir: Option<PathBuf>,
}

/// Behaviour of the offline backends used under `--mock`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MockSettings {
    pub score_noise: f64,
    pub misfire_rate: f64,
    pub inversion_rate: f64,
    pub rewrite_fail_rate: f64,
}

impl Default for MockSettings {
    fn default() -> Self {
        MockSettings {
            score_noise: 0.0,
            misfire_rate: 0.2,
            inversion_rate: 0.05,
            rewrite_fail_rate: 0.1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Stage1Settings {
    pub keep_zero_labels: bool,
}

impl Default for Stage1Settings {
    fn default() -> Self {
        Stage1Settings { keep_zero_labels: true }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthesisSettings {
    /// Documents to synthesize for; all documents when absent.
    pub doc_ids: Option<Vec<String>>,
    /// Cap on the number of documents, applied after `doc_ids`.
    pub max_docs: Option<usize>,
    pub target_labels: Vec<RelevanceLabel>,
    pub per_doc_per_label: usize,
}

impl Default for SynthesisSettings {
    fn default() -> Self {
        SynthesisSettings {
            doc_ids: None,
            max_docs: None,
            target_labels: vec![RelevanceLabel::ONE, RelevanceLabel::TWO, RelevanceLabel::THREE],
            per_doc_per_label: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SubsetSettings {
    pub n_per_label: usize,
}

impl Default for SubsetSettings {
    fn default() -> Self {
        SubsetSettings { n_per_label: 60 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalSettings {
    pub k: usize,
    pub gain: Gain,
    pub unjudged: UnjudgedPolicy,
    pub zero_queries: ZeroQueryPolicy,
    pub qrels: Option<PathBuf>,
    pub run: Option<PathBuf>,
}

impl Default for EvalSettings {
    fn default() -> Self {
        EvalSettings {
            k: 10,
            gain: Gain::default(),
            unjudged: UnjudgedPolicy::default(),
            zero_queries: ZeroQueryPolicy::default(),
            qrels: None,
            run: None,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WeightFunction {
    /// w(s) = s/3
    #[default]
    Linear,
    /// w(s) = 1 for every label above 0
    Uniform,
}

impl WeightFunction {
    pub fn weight(self, label: RelevanceLabel) -> f64 {
        match self {
            WeightFunction::Linear => crate::loss::weight_default(label),
            WeightFunction::Uniform => f64::from(u8::from(label != RelevanceLabel::ZERO)),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LossSettings {
    pub temperature: f64,
    pub weight: WeightFunction,
}

impl Default for LossSettings {
    fn default() -> Self {
        LossSettings {
            temperature: DEFAULT_TEMPERATURE,
            weight: WeightFunction::default(),
        }
    }
}

impl PipelineConfig {
    /// Reads a config file and resolves its relative paths.
    pub fn load(path: &Path) -> Result<Self, PipelineError> {
        let text = std::fs::read_to_string(path).map_err(|e| PipelineError::Config(format!("{}: {e}", path.display())))?;
        let mut config: PipelineConfig = serde_json::from_str(&text).map_err(|e| PipelineError::Config(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        config.resolve_paths(base);
        config.validate()?;
        Ok(config)
    }

    pub fn resolve_paths(&mut self, base: &Path) {
        let resolve = |p: &mut Option<PathBuf>| {
            if let Some(path) = p.as_mut() {
                if path.is_relative() {
                    *path = base.join(&*path);
                }
            }
        };
        resolve(&mut self.paths.labeled);
        resolve(&mut self.paths.unlabeled);
        resolve(&mut self.paths.docs);
        resolve(&mut self.paths.raw_items);
        resolve(&mut self.paths.workdir);
        resolve(&mut self.eval.qrels);
        resolve(&mut self.eval.run);
        for path in self.prompts.values_mut() {
            if path.is_relative() {
                *path = base.join(&*path);
            }
        }
    }

    pub fn validate(&self) -> Result<(), PipelineError> {
        if self.max_concurrency == 0 {
            return Err(PipelineError::Config("max_concurrency must be >= 1".into()));
        }
        if self.eval.k == 0 {
            return Err(PipelineError::Config("eval.k must be >= 1".into()));
        }
        if self.loss.temperature.is_nan() || self.loss.temperature <= 0.0 {
            return Err(PipelineError::Config("loss.temperature must be > 0".into()));
        }
        let rates = [
            ("mock.score_noise", self.mock.score_noise),
            ("mock.misfire_rate", self.mock.misfire_rate),
            ("mock.inversion_rate", self.mock.inversion_rate),
            ("mock.rewrite_fail_rate", self.mock.rewrite_fail_rate),
        ];
        for (name, rate) in rates {
            if !(0.0..=1.0).contains(&rate) {
                return Err(PipelineError::Config(format!("{name} must lie in [0, 1]")));
            }
        }
        for (role, endpoint) in &self.endpoints {
            endpoint
                .validate()
                .map_err(|e| PipelineError::Config(format!("endpoints.{}: {e}", role_name(*role))))?;
        }
        Ok(())
    }
}

pub(crate) fn role_name(role: ModelRole) -> &'static str {
    match role {
        ModelRole::Score => "score",
        ModelRole::Query => "query",
        ModelRole::Judge => "judge",
        ModelRole::Rewrite => "rewrite",
        ModelRole::Reasoning => "reasoning",
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_object_is_default() {
        let c: PipelineConfig = serde_json::from_str("{}").unwrap();
        assert_eq!(c, PipelineConfig::default());
        assert_eq!(c.subset.n_per_label, 60);
    }

    #[test]
    fn endpoints_keyed_by_role() {
        let c: PipelineConfig =
            serde_json::from_str(r#"{"endpoints": {"score": {"base_url": "http://localhost:8000", "model_name": "m", "temperature": 0.0}}}"#)
                .unwrap();
        assert_eq!(c.endpoints[&ModelRole::Score].max_concurrency, 8);
        assert!(c.validate().is_ok());
    }

    #[test]
    fn unknown_field_rejected() {
        assert!(serde_json::from_str::<PipelineConfig>(r#"{"sed": 1}"#).is_err());
    }

    #[test]
    fn relative_paths_resolve_against_config_dir() {
        let mut c = PipelineConfig::default();
        c.paths.docs = Some("docs.jsonl".into());
        c.paths.labeled = Some("/abs/l.jsonl".into());
        c.resolve_paths(Path::new("/cfg"));
        assert_eq!(c.paths.docs.unwrap(), Path::new("/cfg/docs.jsonl"));
        assert_eq!(c.paths.labeled.unwrap(), Path::new("/abs/l.jsonl"));
    }

    #[test]
    fn bad_rate_is_config_error() {
        let mut c = PipelineConfig::default();
        c.mock.inversion_rate = 1.5;
        assert_eq!(c.validate().unwrap_err().exit_code(), 2);
    }
}
