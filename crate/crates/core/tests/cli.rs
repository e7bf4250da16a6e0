//! End-to-end tests of the `ssra` binary on generated fixtures.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::Command;

use serde_json::Value;

struct Out {
    code: i32,
    stdout: String,
    stderr: String,
}

fn ssra(cwd: &Path, args: &[&str]) -> Out {
    let out = Command::new(env!("CARGO_BIN_EXE_ssra"))
        .args(args)
        .current_dir(cwd)
        .env_remove("SSRA_BASE_URL")
        .env_remove("SSRA_API_KEY")
        .output()
        .unwrap();
    Out {
        code: out.status.code().unwrap_or(-1),
        stdout: String::from_utf8(out.stdout).unwrap(),
        stderr: String::from_utf8(out.stderr).unwrap(),
    }
}

fn ok(cwd: &Path, args: &[&str]) -> Vec<Value> {
    let out = ssra(cwd, args);
    assert_eq!(out.code, 0, "ssra {args:?}: {}", out.stderr);
    out.stdout
        .lines()
        .filter(|l| l.starts_with('{'))
        .map(|l| serde_json::from_str(l).unwrap())
        .collect()
}

fn error_kind(out: &Out) -> String {
    let v: Value = serde_json::from_str(out.stderr.trim()).unwrap_or_else(|_| panic!("stderr is not JSON: {}", out.stderr));
    v["error"]["kind"].as_str().unwrap().to_string()
}

/// Fixture in `<tmp>/fx` with config `fx/config.json` and workdir `fx/work`.
fn fixture(docs: usize) -> tempfile::TempDir {
    let dir = tempfile::tempdir().unwrap();
    ok(dir.path(), &["fixture", "--out", "fx", "--docs", &docs.to_string(), "--seed", "3"]);
    dir
}

const CFG: &str = "fx/config.json";

fn read_jsonl(path: &Path) -> Vec<Value> {
    std::fs::read_to_string(path)
        .unwrap()
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect()
}

fn tree(root: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        for e in std::fs::read_dir(&dir).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else if p.file_name().unwrap() != "manifest.json" {
                out.insert(p.strip_prefix(root).unwrap().to_path_buf(), std::fs::read(&p).unwrap());
            }
        }
    }
    out
}

#[test]
fn full_run_then_resume_is_a_noop() {
    let dir = fixture(40);
    let first = ok(dir.path(), &["--config", CFG, "--mock", "run"]);
    assert!(first.iter().all(|r| r["status"] == "ran"), "{first:?}");
    let stages: Vec<&str> = first.iter().map(|r| r["stage"].as_str().unwrap()).collect();
    assert_eq!(stages.first(), Some(&"ingest"));
    assert!(stages.contains(&"assemble") && stages.contains(&"eval-retrieval"));

    let before = tree(&dir.path().join("fx/work"));
    let second = ok(dir.path(), &["--config", CFG, "--mock", "run"]);
    assert!(second.iter().all(|r| r["status"] == "up_to_date"), "{second:?}");
    assert_eq!(before, tree(&dir.path().join("fx/work")));

    let forced = ok(dir.path(), &["--config", CFG, "--mock", "--force", "dedup"]);
    assert_eq!(forced[0]["status"], "ran");
}

#[test]
fn report_totals_are_column_sums() {
    let dir = fixture(30);
    ok(dir.path(), &["--config", CFG, "--mock", "run"]);
    let out = ssra(dir.path(), &["--config", CFG, "report"]);
    assert_eq!(out.code, 0, "{}", out.stderr);
    assert!(out.stdout.contains("filter-score"));
    let report: Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("fx/work/report.json")).unwrap()).unwrap();
    for col in ["n_in", "n_out", "n_dropped"] {
        let sum: u64 = report["stages"]
            .as_array()
            .unwrap()
            .iter()
            .map(|s| s["counts"][col].as_u64().unwrap())
            .sum();
        assert_eq!(report["totals"][col].as_u64().unwrap(), sum, "{col}");
    }
}

#[test]
fn report_on_empty_workdir_fails() {
    let dir = tempfile::tempdir().unwrap();
    let out = ssra(dir.path(), &["--workdir", "empty", "report"]);
    assert_eq!(out.code, 3);
    assert_eq!(error_kind(&out), "no_manifests");
    assert!(out.stderr.contains("no manifests"));
}

#[test]
fn exit_codes() {
    let dir = fixture(20);

    // Configuration problems: 2.
    let out = ssra(dir.path(), &["ingest"]);
    assert_eq!((out.code, error_kind(&out).as_str()), (2, "config"));
    std::fs::write(dir.path().join("bad.json"), r#"{"seed": 1, "unknown_field": true}"#).unwrap();
    let out = ssra(dir.path(), &["--config", "bad.json", "--workdir", "w", "ingest"]);
    assert_eq!(out.code, 2, "{}", out.stderr);
    let out = ssra(dir.path(), &["--concurrency", "0", "run"]);
    assert_eq!(out.code, 2);

    // Missing upstream stage: 3.
    let out = ssra(dir.path(), &["--config", CFG, "--mock", "stage1"]);
    assert_eq!((out.code, error_kind(&out).as_str()), (3, "missing_upstream"));

    // Tampered upstream output: 4.
    ok(dir.path(), &["--config", CFG, "--mock", "ingest"]);
    ok(dir.path(), &["--config", CFG, "--mock", "dedup"]);
    let deduped = dir.path().join("fx/work/dedup/output.jsonl");
    let mut text = std::fs::read_to_string(&deduped).unwrap();
    text.push('\n');
    std::fs::write(&deduped, text).unwrap();
    let out = ssra(dir.path(), &["--config", CFG, "--mock", "stage1"]);
    assert_eq!((out.code, error_kind(&out).as_str()), (4, "digest_mismatch"));

    // A stage whose own outputs were tampered with simply reruns.
    let rerun = ok(dir.path(), &["--config", CFG, "--mock", "dedup"]);
    assert_eq!(rerun[0]["status"], "ran");
    ok(dir.path(), &["--config", CFG, "--mock", "stage1"]);

    // Held lock.
    std::fs::write(dir.path().join("fx/work/.ssra.lock"), "1").unwrap();
    let out = ssra(dir.path(), &["--config", CFG, "--mock", "dedup"]);
    assert_eq!((out.code, error_kind(&out).as_str()), (3, "locked"));
}

#[test]
fn concurrency_does_not_change_artifacts() {
    let dir = fixture(40);
    ok(
        dir.path(),
        &["--config", CFG, "--mock", "--workdir", "serial", "--concurrency", "1", "run"],
    );
    ok(
        dir.path(),
        &["--config", CFG, "--mock", "--workdir", "wide", "--concurrency", "32", "run"],
    );
    let a = tree(&dir.path().join("serial"));
    let b = tree(&dir.path().join("wide"));
    assert_eq!(a.keys().collect::<Vec<_>>(), b.keys().collect::<Vec<_>>());
    for (k, v) in &a {
        assert!(b[k] == *v, "{} differs", k.display());
    }
}

#[test]
fn every_record_is_accounted_for() {
    let dir = fixture(40);
    ok(dir.path(), &["--config", CFG, "--mock", "run"]);
    let work = dir.path().join("fx/work");
    let manifest =
        |stage: &str| -> Value { serde_json::from_str(&std::fs::read_to_string(work.join(stage).join("manifest.json")).unwrap()).unwrap() };

    for stage in ["dedup", "filter-score", "filter-pairwise", "assemble"] {
        let c = &manifest(stage)["counts"];
        assert_eq!(
            c["n_in"].as_u64(),
            Some(c["n_out"].as_u64().unwrap() + c["n_dropped"].as_u64().unwrap()),
            "{stage}"
        );
    }

    let synthesized = read_jsonl(&work.join("synth/output.jsonl")).len();
    let score_decisions = read_jsonl(&work.join("filter-score/decisions.jsonl"));
    assert_eq!(score_decisions.len(), synthesized);
    let kept = score_decisions.iter().filter(|d| d["verdict"] == "kept").count();
    assert_eq!(kept, read_jsonl(&work.join("filter-score/output.jsonl")).len());
    for d in score_decisions.iter().filter(|d| d["verdict"] == "kept") {
        assert_eq!(d["detail"]["target_label"], d["detail"]["predicted_label"]);
    }

    let pair_decisions = read_jsonl(&work.join("filter-pairwise/decisions.jsonl"));
    assert_eq!(pair_decisions.len(), kept);
    let pair_kept = pair_decisions.iter().filter(|d| d["verdict"] == "kept").count();
    assert_eq!(pair_kept, read_jsonl(&work.join("filter-pairwise/output.jsonl")).len());

    let stage1 = read_jsonl(&work.join("stage1/output.jsonl")).len();
    let assembled = read_jsonl(&work.join("assemble/output.jsonl"));
    let c = &manifest("assemble")["counts"];
    assert_eq!(assembled.len() as u64, c["n_out"].as_u64().unwrap());
    assert_eq!(c["n_in"].as_u64().unwrap(), (stage1 + pair_kept) as u64);
}

#[test]
fn standalone_commands() {
    let dir = fixture(30);
    let p = dir.path();
    ok(p, &["--config", CFG, "--mock", "ingest"]);
    let stats = ok(p, &["--config", CFG, "stats", "--unit", "tokens"]);
    assert_eq!(stats[0]["stage"], "stats");
    let report: Value = serde_json::from_str(&std::fs::read_to_string(p.join("fx/work/stats/report.json")).unwrap()).unwrap();
    let labeled = read_jsonl(&p.join("fx/labeled.jsonl")).len() as u64;
    assert_eq!(report["stats"]["size"].as_u64(), Some(labeled), "{report}");

    ok(p, &["--config", CFG, "subset", "binary"]);
    for l in read_jsonl(&p.join("fx/work/subset-binary/output.jsonl")) {
        assert!(l["label"] == 0 || l["label"] == 3);
    }
    let out = ssra(p, &["--config", CFG, "subset", "balanced", "--n", "1000"]);
    assert_eq!(out.code, 3);
    assert!(out.stderr.contains("label"), "{}", out.stderr);

    ok(p, &["--config", CFG, "eval-retrieval", "--k", "5", "--gain", "exponential"]);
    let out = ssra(p, &["--config", CFG, "eval-pairclass"]);
    assert_eq!((out.code, error_kind(&out).as_str()), (3, "metric"));
    let qrels = std::fs::read_to_string(p.join("fx/qrels.tsv")).unwrap();
    let judged: std::collections::HashSet<(String, String)> = qrels
        .lines()
        .map(|l| {
            let f: Vec<&str> = l.split('\t').collect();
            (f[0].to_string(), f[1].to_string())
        })
        .collect();
    let run: String = std::fs::read_to_string(p.join("fx/run.tsv"))
        .unwrap()
        .lines()
        .filter(|l| {
            let f: Vec<&str> = l.split('\t').collect();
            judged.contains(&(f[0].to_string(), f[1].to_string()))
        })
        .map(|l| format!("{l}\n"))
        .collect();
    std::fs::write(p.join("judged_run.tsv"), run).unwrap();
    ok(p, &["--config", CFG, "eval-pairclass", "--run", "judged_run.tsv"]);

    std::fs::write(p.join("queries.txt"), "a\nA \nb\n").unwrap();
    ok(p, &["--config", CFG, "diversity", "--input", "queries.txt", "--format", "text"]);
    let div: Value = serde_json::from_str(&std::fs::read_to_string(p.join("fx/work/diversity/report.json")).unwrap()).unwrap();
    assert!(div.to_string().contains("\"unique\":2"), "{div}");

    std::fs::write(
        p.join("batch.json"),
        r#"{"queries": [[1, 0], [0, 1]], "documents": [[1, 0.1], [0.2, 1]], "labels": [3, 1], "temperature": 0.5}"#,
    )
    .unwrap();
    ok(p, &["--config", CFG, "loss-check", "--input", "batch.json"]);
    let loss: Value = serde_json::from_str(&std::fs::read_to_string(p.join("fx/work/loss-check/report.json")).unwrap()).unwrap();
    assert!(loss["loss"].as_f64().unwrap() > 0.0, "{loss}");

    ok(p, &["--config", CFG, "--mock", "reasoning"]);
}
