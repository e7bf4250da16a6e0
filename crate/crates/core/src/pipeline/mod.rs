//! Configuration, manifests and stage orchestration behind the `ssra` CLI.
//!
//! Every stage writes into `<workdir>/<stage>/` an `output.jsonl` (or other
//! named outputs), an optional `decisions.jsonl` audit log, a `report.json`
//! and a `manifest.json` with SHA-256 digests of its inputs and outputs.
//! A stage whose inputs, config and outputs still match its manifest is
//! skipped; an upstream output that no longer matches its manifest aborts the
//! run with exit code 4.

pub mod cli;
pub mod config;
mod error;
pub mod fixture;
pub mod manifest;
pub mod report;
pub mod stages;
pub mod workdir;

pub use config::PipelineConfig;
pub use error::PipelineError;
pub use manifest::{StageCounts, StageManifest};
pub use report::{build_report, RunReport};
pub use stages::{Pipeline, StageRun};
pub use workdir::{StageStatus, Workdir};
