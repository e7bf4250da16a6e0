use std::fmt::Write;

use serde::Serialize;
use serde_json::Value;

use super::manifest::{write_json_pretty, StageCounts};
use super::stages::STAGE_ORDER;
use super::workdir::{Workdir, REPORT_FILE};
use super::PipelineError;
use crate::metrics::REPORT_SCHEMA_VERSION;

#[derive(Debug, Clone, Serialize)]
pub struct StageSummary {
    pub stage: String,
    pub counts: StageCounts,
    pub started_at: String,
    pub finished_at: String,
    pub report: Value,
}

/// Every stage's counts and report, plus column totals.
#[derive(Debug, Clone, Serialize)]
pub struct RunReport {
    pub schema_version: u32,
    pub stages: Vec<StageSummary>,
    pub totals: StageCounts,
}

fn order_key(stage: &str) -> (usize, String) {
    let pos = STAGE_ORDER.iter().position(|s| *s == stage).unwrap_or(STAGE_ORDER.len());
    (pos, stage.to_string())
}

pub fn build_report(workdir: &Workdir) -> Result<RunReport, PipelineError> {
    let mut manifests = workdir.manifests()?;
    if manifests.is_empty() {
        return Err(PipelineError::NoManifests(workdir.root().to_path_buf()));
    }
    manifests.sort_by_key(|m| order_key(&m.stage));
    let mut totals = StageCounts::default();
    let mut stages = Vec::with_capacity(manifests.len());
    for m in manifests {
        let path = workdir.stage_dir(&m.stage).join(REPORT_FILE);
        let report = match std::fs::read_to_string(&path) {
            Ok(text) => serde_json::from_str(&text).map_err(|e| PipelineError::CorruptManifest {
                path: path.clone(),
                message: e.to_string(),
            })?,
            Err(_) => Value::Null,
        };
        totals += m.counts;
        stages.push(StageSummary {
            stage: m.stage,
            counts: m.counts,
            started_at: m.started_at,
            finished_at: m.finished_at,
            report,
        });
    }
    Ok(RunReport {
        schema_version: REPORT_SCHEMA_VERSION,
        stages,
        totals,
    })
}

pub fn render_table(report: &RunReport) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "{:<18} {:>10} {:>10} {:>10}", "stage", "in", "out", "dropped");
    for s in &report.stages {
        let _ = writeln!(
            out,
            "{:<18} {:>10} {:>10} {:>10}",
            s.stage, s.counts.n_in, s.counts.n_out, s.counts.n_dropped
        );
    }
    let t = report.totals;
    let _ = writeln!(out, "{:<18} {:>10} {:>10} {:>10}", "total", t.n_in, t.n_out, t.n_dropped);
    out
}

/// Builds the report, writes `<workdir>/report.json` and returns it.
pub fn cmd_report(workdir: &Workdir) -> Result<RunReport, PipelineError> {
    let report = build_report(workdir)?;
    write_json_pretty(&workdir.root().join(REPORT_FILE), &report)?;
    Ok(report)
}
