use std::cell::RefCell;
use std::collections::{BTreeMap, BTreeSet};
use std::fs::OpenOptions;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;

use super::manifest::{digest_file, write_json_pretty, FileDigest, StageCounts, StageManifest, MANIFEST_FILE, MANIFEST_SCHEMA_VERSION};
use super::PipelineError;
use crate::corpus::io::write_jsonl_file;
use crate::corpus::{save_corpus, Corpus};

pub const LOCK_FILE: &str = ".ssra.lock";
pub const REPORT_FILE: &str = "report.json";

/// Root directory of a run: one subdirectory per stage.
#[derive(Debug, Clone)]
pub struct Workdir {
    root: PathBuf,
}

/// Held for the duration of a command; removes the lock file on drop.
#[derive(Debug)]
pub struct WorkdirLock {
    path: PathBuf,
}

impl Drop for WorkdirLock {
    fn drop(&mut self) {
        let _ = std::fs::remove_file(&self.path);
    }
}

/// A file a stage reads.
#[derive(Debug, Clone)]
pub enum Input {
    /// A file outside the workdir, e.g. from the config.
    External { name: String, path: PathBuf },
    /// An output of an earlier stage; must match that stage's manifest.
    Upstream { stage: String, file: String },
}

impl Input {
    pub fn external(name: impl Into<String>, path: impl Into<PathBuf>) -> Self {
        Input::External {
            name: name.into(),
            path: path.into(),
        }
    }

    pub fn upstream(stage: impl Into<String>, file: impl Into<String>) -> Self {
        Input::Upstream {
            stage: stage.into(),
            file: file.into(),
        }
    }

    /// Key under which the input is recorded and looked up.
    pub fn key(&self) -> String {
        match self {
            Input::External { name, .. } => name.clone(),
            Input::Upstream { stage, file } => format!("{stage}/{file}"),
        }
    }
}

#[derive(Debug, Clone)]
pub struct StagePlan {
    pub name: String,
    pub inputs: Vec<Input>,
    /// Everything besides the inputs that can change the outputs.
    pub config: serde_json::Value,
}

#[derive(Debug, Clone)]
pub struct StageOutcome {
    pub counts: StageCounts,
    pub report: serde_json::Value,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum StageStatus {
    Ran,
    UpToDate,
}

/// What a stage body sees: resolved inputs and a place to write outputs.
#[derive(Debug)]
pub struct StageContext {
    dir: PathBuf,
    inputs: BTreeMap<String, PathBuf>,
    written: RefCell<BTreeSet<String>>,
}

impl StageContext {
    pub fn input(&self, key: &str) -> &Path {
        self.inputs.get(key).unwrap_or_else(|| panic!("stage did not declare input {key:?}"))
    }

    pub fn has_input(&self, key: &str) -> bool {
        self.inputs.contains_key(key)
    }

    /// Path for an output file; the file is digested after the stage body.
    pub fn output_path(&self, file: &str) -> PathBuf {
        self.written.borrow_mut().insert(file.to_string());
        self.dir.join(file)
    }

    pub fn write_corpus(&self, file: &str, corpus: &Corpus) -> Result<(), PipelineError> {
        Ok(save_corpus(corpus, &self.output_path(file))?)
    }

    pub fn write_jsonl<T: Serialize>(&self, file: &str, items: impl IntoIterator<Item = T>) -> Result<(), PipelineError> {
        Ok(write_jsonl_file(&self.output_path(file), items)?)
    }

    pub fn write_json<T: Serialize + ?Sized>(&self, file: &str, value: &T) -> Result<(), PipelineError> {
        write_json_pretty(&self.output_path(file), value)
    }
}

fn now() -> String {
    chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Millis, true)
}

impl Workdir {
    pub fn open(root: impl Into<PathBuf>) -> Result<Self, PipelineError> {
        let root = root.into();
        std::fs::create_dir_all(&root).map_err(PipelineError::io(&root))?;
        Ok(Workdir { root })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn stage_dir(&self, stage: &str) -> PathBuf {
        self.root.join(stage)
    }

    pub fn manifest_path(&self, stage: &str) -> PathBuf {
        self.stage_dir(stage).join(MANIFEST_FILE)
    }

    pub fn lock(&self) -> Result<WorkdirLock, PipelineError> {
        let path = self.root.join(LOCK_FILE);
        match OpenOptions::new().write(true).create_new(true).open(&path) {
            Ok(mut f) => {
                let _ = writeln!(f, "{}", std::process::id());
                Ok(WorkdirLock { path })
            }
            Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => Err(PipelineError::Locked(path)),
            Err(e) => Err(PipelineError::Io { path, source: e }),
        }
    }

    /// All stage manifests, ordered by stage directory name.
    pub fn manifests(&self) -> Result<Vec<StageManifest>, PipelineError> {
        let mut dirs: Vec<PathBuf> = std::fs::read_dir(&self.root)
            .map_err(PipelineError::io(&self.root))?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.join(MANIFEST_FILE).is_file())
            .collect();
        dirs.sort();
        dirs.iter().map(|d| StageManifest::load(&d.join(MANIFEST_FILE))).collect()
    }

    /// Whether `stage` has produced a manifest.
    pub fn has_stage(&self, stage: &str) -> bool {
        self.manifest_path(stage).is_file()
    }

    /// Resolves an upstream output and checks it against the recorded digest.
    fn resolve_upstream(&self, consumer: &str, stage: &str, file: &str) -> Result<(PathBuf, FileDigest), PipelineError> {
        let manifest_path = self.manifest_path(stage);
        if !manifest_path.is_file() {
            return Err(PipelineError::MissingUpstream {
                stage: consumer.to_string(),
                upstream: stage.to_string(),
            });
        }
        let manifest = StageManifest::load(&manifest_path)?;
        let recorded = manifest.outputs.get(file).ok_or_else(|| PipelineError::CorruptManifest {
            path: manifest_path.clone(),
            message: format!("no output named {file:?}"),
        })?;
        let path = self.stage_dir(stage).join(file);
        let actual = digest_file(&path, format!("{stage}/{file}"))?;
        if actual.sha256 != recorded.sha256 {
            return Err(PipelineError::DigestMismatch {
                path,
                expected: recorded.sha256.clone(),
                actual: actual.sha256,
            });
        }
        Ok((path, actual))
    }

    fn is_current(&self, plan: &StagePlan, inputs: &BTreeMap<String, FileDigest>) -> bool {
        let Ok(manifest) = StageManifest::load(&self.manifest_path(&plan.name)) else {
            return false;
        };
        if manifest.config != plan.config || &manifest.inputs != inputs {
            return false;
        }
        let dir = self.stage_dir(&plan.name);
        manifest
            .outputs
            .iter()
            .all(|(file, d)| digest_file(&dir.join(file), d.path.clone()).is_ok_and(|now| now.sha256 == d.sha256))
    }

    /// Runs `body` unless a manifest with identical inputs, config and intact
    /// outputs already exists (or `force` is set).
    pub fn run_stage(
        &self,
        plan: StagePlan,
        force: bool,
        body: impl FnOnce(&StageContext) -> Result<StageOutcome, PipelineError>,
    ) -> Result<(StageStatus, StageManifest), PipelineError> {
        let mut paths = BTreeMap::new();
        let mut digests = BTreeMap::new();
        for input in &plan.inputs {
            let (path, digest) = match input {
                Input::External { path, .. } => {
                    if !path.is_file() {
                        return Err(PipelineError::Config(format!("input {} does not exist", path.display())));
                    }
                    (path.clone(), digest_file(path, path.display().to_string())?)
                }
                Input::Upstream { stage, file } => self.resolve_upstream(&plan.name, stage, file)?,
            };
            paths.insert(input.key(), path);
            digests.insert(input.key(), digest);
        }

        let manifest_path = self.manifest_path(&plan.name);
        if !force && self.is_current(&plan, &digests) {
            return Ok((StageStatus::UpToDate, StageManifest::load(&manifest_path)?));
        }

        let dir = self.stage_dir(&plan.name);
        std::fs::create_dir_all(&dir).map_err(PipelineError::io(&dir))?;
        if manifest_path.exists() {
            std::fs::remove_file(&manifest_path).map_err(PipelineError::io(&manifest_path))?;
        }

        let started_at = now();
        let ctx = StageContext {
            dir: dir.clone(),
            inputs: paths,
            written: RefCell::new(BTreeSet::new()),
        };
        let outcome = body(&ctx)?;
        ctx.write_json(REPORT_FILE, &outcome.report)?;

        let mut outputs = BTreeMap::new();
        for file in ctx.written.into_inner() {
            outputs.insert(file.clone(), digest_file(&dir.join(&file), format!("{}/{file}", plan.name))?);
        }
        let manifest = StageManifest {
            schema_version: MANIFEST_SCHEMA_VERSION,
            stage: plan.name,
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            inputs: digests,
            outputs,
            config: plan.config,
            counts: outcome.counts,
            started_at,
            finished_at: now(),
        };
        manifest.save(&manifest_path)?;
        Ok((StageStatus::Ran, manifest))
    }
}
