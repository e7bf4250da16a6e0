//! Synthetic input set for offline runs: documents, raw items, labeled and
//! unlabeled pairs, eval qrels/run and a config wired to all of them.

use std::path::Path;

use rand::seq::index;
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::manifest::write_json_pretty;
use super::PipelineError;
use crate::corpus::io::write_jsonl_file;
use crate::corpus::{assemble_document, save_corpus, save_documents, Corpus, Document, DocumentTable, PairRecord, Query, RawItem, RelevanceLabel};
use crate::modelio::mock::{overlap_label, stable_unit, token_jaccard, OverlapQueryGenerator};
use crate::modelio::QueryModel;

const SYLLABLES: [&str; 14] = ["ka", "mo", "ri", "tan", "lu", "ve", "sho", "pi", "dra", "nel", "zu", "go", "mi", "ber"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct FixtureSummary {
    pub n_docs: usize,
    pub n_labeled: usize,
    pub n_unlabeled: usize,
    pub n_eval_queries: usize,
}

fn vocabulary() -> Vec<String> {
    let mut words = Vec::new();
    for a in SYLLABLES {
        for b in SYLLABLES {
            if a != b {
                words.push(format!("{a}{b}"));
            }
        }
    }
    words
}

fn pick_words(rng: &mut ChaCha8Rng, vocab: &[String], n: usize) -> Vec<String> {
    index::sample(rng, vocab.len(), n).into_iter().map(|i| vocab[i].clone()).collect()
}

fn build_documents(n_docs: usize, rng: &mut ChaCha8Rng) -> Result<(DocumentTable, Vec<RawItem>), PipelineError> {
    let vocab = vocabulary();
    let mut table = DocumentTable::new();
    let mut raw = Vec::with_capacity(n_docs);
    for i in 0..n_docs {
        let doc_id = format!("v{i:04}");
        let n_words = rng.random_range(3..=6);
        let title_words = pick_words(rng, &vocab, n_words);
        let title = title_words.join(" ");
        let ocr = format!("{} subtitle", title_words[..n_words / 2 + 1].join(" "));
        let asr = format!("narrator says {}", pick_words(rng, &vocab, 3).join(" "));
        table.insert(assemble_document(&doc_id, &title, Some(&ocr), Some(&asr), None)?)?;
        raw.push(RawItem {
            doc_id,
            title,
            ocr: Some(ocr),
            asr: Some(asr),
            rewritten: None,
        });
    }
    Ok((table, raw))
}

/// Writes a fixture into `dir` and returns its sizes. Output is a pure
/// function of `(n_docs, seed)`.
pub fn write_fixture(dir: &Path, n_docs: usize, seed: u64) -> Result<FixtureSummary, PipelineError> {
    if n_docs < 10 {
        return Err(PipelineError::Config("fixture needs at least 10 documents".into()));
    }
    std::fs::create_dir_all(dir).map_err(PipelineError::io(dir))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (docs, raw) = build_documents(n_docs, &mut rng)?;
    let all: Vec<&Document> = docs.iter().collect();
    let generator = OverlapQueryGenerator::new(seed ^ 0x5eed, 0.0);

    let n_labeled_docs = n_docs * 2 / 5;
    let n_unlabeled_docs = n_docs * 3 / 10;
    let mut labeled = Vec::new();
    let mut unlabeled = Vec::new();
    for (i, doc) in all.iter().enumerate().take(n_labeled_docs + n_unlabeled_docs) {
        let other = all[(i * 7 + 3) % n_docs];
        let mut queries = Vec::new();
        for label in [RelevanceLabel::THREE, RelevanceLabel::TWO, RelevanceLabel::ONE] {
            queries.push(generator.generate(doc, label, 100).map_err(|e| PipelineError::Stage(e.to_string()))?);
        }
        queries.push(other.title.split(' ').next().unwrap_or("none").to_string());

        for (k, text) in queries.into_iter().enumerate() {
            // Annotate with the same overlap rule the offline scorer uses.
            let label = overlap_label(token_jaccard(&text, &doc.title));
            if i < n_labeled_docs {
                let query = Query::new(format!("lq{i}-{k}"), text)?;
                labeled.push(PairRecord::labeled(query, doc.doc_id.clone(), label));
            } else {
                let query = Query::new(format!("uq{i}-{k}"), text)?;
                unlabeled.push(PairRecord::unlabeled(query, doc.doc_id.clone()));
            }
        }
        if i < n_labeled_docs && i % 10 == 0 {
            // Re-annotated duplicate: same query and label on the same doc.
            let mut dup: PairRecord = labeled[labeled.len() - 4].clone();
            dup.query.query_id = format!("lq{i}-dup");
            labeled.push(dup);
        }
    }

    let vocab_seed = seed ^ 0xe7a1;
    let n_eval = (n_docs / 10).max(1);
    let mut qrels = String::new();
    let mut run = String::new();
    for i in 0..n_eval {
        let doc = all[i];
        let qid = format!("eq{i}");
        let text = generator
            .generate(doc, RelevanceLabel::THREE, 200)
            .map_err(|e| PipelineError::Stage(e.to_string()))?;
        for j in 0..6 {
            let cand = all[(i + j * 13) % n_docs];
            let label = overlap_label(token_jaccard(&text, &cand.title));
            if j < 5 {
                qrels.push_str(&format!("{qid}\t{}\t{}\n", cand.doc_id, label));
            }
            let noise = stable_unit(vocab_seed, &[&qid, &cand.doc_id]) * 0.5;
            run.push_str(&format!("{qid}\t{}\t{:.6}\n", cand.doc_id, token_jaccard(&text, &cand.title) + noise));
        }
    }

    save_documents(&docs, &dir.join("docs.jsonl"))?;
    write_jsonl_file(&dir.join("raw_items.jsonl"), &raw)?;
    save_corpus(&Corpus::new(labeled.clone())?, &dir.join("labeled.jsonl"))?;
    save_corpus(&Corpus::new(unlabeled.clone())?, &dir.join("unlabeled.jsonl"))?;
    std::fs::write(dir.join("qrels.tsv"), qrels).map_err(PipelineError::io(dir.join("qrels.tsv")))?;
    std::fs::write(dir.join("run.tsv"), run).map_err(PipelineError::io(dir.join("run.tsv")))?;
    let config = serde_json::json!({
        "paths": {
            "labeled": "labeled.jsonl",
            "unlabeled": "unlabeled.jsonl",
            "docs": "docs.jsonl",
            "raw_items": "raw_items.jsonl",
            "workdir": "work"
        },
        "eval": {"qrels": "qrels.tsv", "run": "run.tsv"},
        "seed": seed
    });
    write_json_pretty(&dir.join("config.json"), &config)?;

    Ok(FixtureSummary {
        n_docs,
        n_labeled: labeled.len(),
        n_unlabeled: unlabeled.len(),
        n_eval_queries: n_eval,
    })
}
