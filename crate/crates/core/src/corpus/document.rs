use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

use super::CorpusError;

/// Textual form of a short-video item.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Document {
    pub doc_id: String,
    pub title: String,
    pub body: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ocr: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub asr: Option<String>,
}

impl Document {
    /// Text presented to models: title, one newline, body.
    pub fn render(&self) -> String {
        format!("{}\n{}", self.title, self.body)
    }

    pub fn validate(&self) -> Result<(), CorpusError> {
        if self.doc_id.is_empty() {
            return Err(CorpusError::EmptyField("doc_id"));
        }
        Ok(())
    }
}

/// Body used when no rewrite is available.
pub fn fallback_body(ocr: Option<&str>, asr: Option<&str>) -> String {
    format!("{};{}", ocr.unwrap_or(""), asr.unwrap_or(""))
}

/// Builds a document from its raw signals.
///
/// The body is the rewritten text when present and non-empty, otherwise the
/// raw signals joined as `"{ocr};{asr}"` with absent fields as empty strings.
fn nonempty(s: Option<&str>) -> Option<&str> {
    s.filter(|s| !s.is_empty())
}

pub fn assemble_document(
    doc_id: impl Into<String>,
    title: impl Into<String>,
    ocr: Option<&str>,
    asr: Option<&str>,
    rewritten: Option<&str>,
) -> Result<Document, CorpusError> {
    let doc_id = doc_id.into();
    if doc_id.is_empty() {
        return Err(CorpusError::EmptyField("doc_id"));
    }
    let body = match nonempty(rewritten) {
        Some(text) => text.to_string(),
        None => {
            if nonempty(ocr).is_none() && nonempty(asr).is_none() {
                return Err(CorpusError::EmptyDocumentSources { doc_id });
            }
            fallback_body(ocr, asr)
        }
    };
    Ok(Document {
        doc_id,
        title: title.into(),
        body,
        ocr: ocr.map(str::to_string),
        asr: asr.map(str::to_string),
    })
}

/// A raw item before document assembly.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawItem {
    pub doc_id: String,
    #[serde(default)]
    pub title: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ocr: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub asr: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rewritten: Option<String>,
}

/// Documents keyed by id, in insertion order.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct DocumentTable {
    docs: IndexMap<String, Document>,
}

impl DocumentTable {
    pub fn new() -> Self {
        Self::default()
    }

    /// Inserts a document. Re-inserting identical content is a no-op;
    /// conflicting content under the same id is an error.
    pub fn insert(&mut self, doc: Document) -> Result<(), CorpusError> {
        doc.validate()?;
        match self.docs.get(&doc.doc_id) {
            Some(existing) if *existing == doc => Ok(()),
            Some(_) => Err(CorpusError::ConflictingDocument { doc_id: doc.doc_id }),
            None => {
                self.docs.insert(doc.doc_id.clone(), doc);
                Ok(())
            }
        }
    }

    pub fn get(&self, doc_id: &str) -> Option<&Document> {
        self.docs.get(doc_id)
    }

    pub fn contains(&self, doc_id: &str) -> bool {
        self.docs.contains_key(doc_id)
    }

    pub fn len(&self) -> usize {
        self.docs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.docs.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &Document> {
        self.docs.values()
    }
}

impl FromIterator<Document> for Result<DocumentTable, CorpusError> {
    fn from_iter<I: IntoIterator<Item = Document>>(iter: I) -> Self {
        let mut table = DocumentTable::new();
        for doc in iter {
            table.insert(doc)?;
        }
        Ok(table)
    }
}
