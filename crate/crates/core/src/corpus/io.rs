//! JSON Lines persistence.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;

use super::record::RecordLine;
use super::{Corpus, CorpusError, Document, DocumentTable, PairRecord};

/// Whether records must carry labels.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Schema {
    Labeled,
    Unlabeled,
    /// Labels optional per record.
    Mixed,
}

/// Reads one JSON value per non-blank line. Errors carry the 1-based line.
pub fn read_jsonl<T: DeserializeOwned, R: BufRead>(reader: R) -> Result<Vec<T>, CorpusError> {
    let mut out = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| CorpusError::io("<stream>", e).at_line(idx + 1))?;
        if line.trim().is_empty() {
            continue;
        }
        let value = serde_json::from_str(&line).map_err(|e| CorpusError::from(e).at_line(idx + 1))?;
        out.push(value);
    }
    Ok(out)
}

pub fn read_jsonl_file<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>, CorpusError> {
    let file = File::open(path).map_err(|e| CorpusError::io(path, e))?;
    read_jsonl(BufReader::new(file)).map_err(|e| match e {
        CorpusError::Line { line, source } => match *source {
            CorpusError::Io { source, .. } => CorpusError::io(path, source).at_line(line),
            other => other.at_line(line),
        },
        other => other,
    })
}

pub fn write_jsonl<T: Serialize, W: Write>(mut writer: W, items: impl IntoIterator<Item = T>) -> std::io::Result<()> {
    for item in items {
        serde_json::to_writer(&mut writer, &item)?;
        writer.write_all(b"\n")?;
    }
    writer.flush()
}

pub fn write_jsonl_file<T: Serialize>(path: &Path, items: impl IntoIterator<Item = T>) -> Result<(), CorpusError> {
    let file = File::create(path).map_err(|e| CorpusError::io(path, e))?;
    write_jsonl(BufWriter::new(file), items).map_err(|e| CorpusError::io(path, e))
}

pub fn parse_corpus<R: BufRead>(reader: R, schema: Schema) -> Result<Corpus, CorpusError> {
    let mut records = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let lineno = idx + 1;
        let line = line.map_err(|e| CorpusError::io("<stream>", e).at_line(lineno))?;
        if line.trim().is_empty() {
            continue;
        }
        let raw: RecordLine = serde_json::from_str(&line).map_err(|e| CorpusError::from(e).at_line(lineno))?;
        let record = PairRecord::from(raw);
        check_record(&record, schema).map_err(|e| e.at_line(lineno))?;
        records.push(record);
    }
    Ok(Corpus::from_valid(records))
}

fn check_record(record: &PairRecord, schema: Schema) -> Result<(), CorpusError> {
    record.validate()?;
    match (schema, record.label) {
        (Schema::Labeled, None) => Err(CorpusError::MissingLabel {
            query_id: record.query.query_id.clone(),
            provenance: record.provenance.to_string(),
        }),
        (Schema::Unlabeled, Some(_)) => Err(CorpusError::UnexpectedLabel {
            query_id: record.query.query_id.clone(),
        }),
        _ => Ok(()),
    }
}

pub fn load_corpus(path: &Path, schema: Schema) -> Result<Corpus, CorpusError> {
    let file = File::open(path).map_err(|e| CorpusError::io(path, e))?;
    parse_corpus(BufReader::new(file), schema)
}

pub fn write_corpus<W: Write>(corpus: &Corpus, writer: W) -> std::io::Result<()> {
    write_jsonl(writer, corpus.iter().map(RecordLine::from))
}

pub fn save_corpus(corpus: &Corpus, path: &Path) -> Result<(), CorpusError> {
    let file = File::create(path).map_err(|e| CorpusError::io(path, e))?;
    write_corpus(corpus, BufWriter::new(file)).map_err(|e| CorpusError::io(path, e))
}

pub fn load_documents(path: &Path) -> Result<DocumentTable, CorpusError> {
    let file = File::open(path).map_err(|e| CorpusError::io(path, e))?;
    let mut table = DocumentTable::new();
    for (idx, line) in BufReader::new(file).lines().enumerate() {
        let lineno = idx + 1;
        let line = line.map_err(|e| CorpusError::io(path, e).at_line(lineno))?;
        if line.trim().is_empty() {
            continue;
        }
        let doc: Document = serde_json::from_str(&line).map_err(|e| CorpusError::from(e).at_line(lineno))?;
        table.insert(doc).map_err(|e| e.at_line(lineno))?;
    }
    Ok(table)
}

pub fn save_documents(table: &DocumentTable, path: &Path) -> Result<(), CorpusError> {
    write_jsonl_file(path, table.iter())
}
