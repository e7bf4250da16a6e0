//! Prompt templates with named `{slot}` placeholders.
//!
//! `{{` and `}}` produce literal braces. A brace group whose content is not a
//! lowercase identifier (for example inline JSON) is kept verbatim. Leading
//! lines starting with `#` are header comments; `# grammar: <name>` sets the
//! reply grammar.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::ModelError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Slot {
    Title,
    Body,
    Query,
    QueryA,
    QueryB,
    TargetLabel,
    Label,
    Ocr,
    Asr,
}

impl Slot {
    pub const ALL: [Slot; 9] = [
        Slot::Title,
        Slot::Body,
        Slot::Query,
        Slot::QueryA,
        Slot::QueryB,
        Slot::TargetLabel,
        Slot::Label,
        Slot::Ocr,
        Slot::Asr,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Slot::Title => "title",
            Slot::Body => "body",
            Slot::Query => "query",
            Slot::QueryA => "query_a",
            Slot::QueryB => "query_b",
            Slot::TargetLabel => "target_label",
            Slot::Label => "label",
            Slot::Ocr => "ocr",
            Slot::Asr => "asr",
        }
    }

    pub fn from_name(name: &str) -> Option<Slot> {
        Slot::ALL.into_iter().find(|s| s.name() == name)
    }
}

impl fmt::Display for Slot {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{{}}}", self.name())
    }
}

/// How a model reply is parsed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutputGrammar {
    /// Final non-empty line `label: <0-3>`, earlier lines are rationale.
    ScoreLine,
    /// First non-empty line is the query.
    PlainQuery,
    /// Final non-empty line `order: A`, `order: B` or `order: tie`.
    OrderToken,
    /// Whole reply; empty or `CANNOT_REWRITE` means no rewrite.
    RewriteText,
    /// Free-form reasoning ending in a `label: <0-3>` line.
    ReasoningThenScore,
}

impl OutputGrammar {
    fn from_name(name: &str) -> Option<Self> {
        serde_json::from_value(serde_json::Value::String(name.to_string())).ok()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Segment {
    Literal(String),
    Slot(Slot),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PromptTemplate {
    pub template_id: String,
    pub output_grammar: OutputGrammar,
    body: String,
    segments: Vec<Segment>,
}

/// Values bound to slots at render time.
pub type SlotValues<'a> = BTreeMap<Slot, &'a str>;

impl PromptTemplate {
    pub fn new(template_id: impl Into<String>, body: impl Into<String>, output_grammar: OutputGrammar) -> Result<Self, ModelError> {
        let body = body.into();
        let segments = parse_segments(&body)?;
        Ok(PromptTemplate {
            template_id: template_id.into(),
            output_grammar,
            body,
            segments,
        })
    }

    /// Parses a template file; the header must name the grammar unless
    /// `default_grammar` is given.
    pub fn parse_file_text(template_id: &str, text: &str, default_grammar: Option<OutputGrammar>) -> Result<Self, ModelError> {
        let mut grammar = default_grammar;
        let mut rest = text;
        while let Some(line) = rest.lines().next().filter(|l| l.starts_with('#')) {
            if let Some(name) = line.trim_start_matches('#').trim().strip_prefix("grammar:") {
                grammar = Some(
                    OutputGrammar::from_name(name.trim())
                        .ok_or_else(|| ModelError::Prompt(format!("{template_id}: unknown grammar {:?}", name.trim())))?,
                );
            }
            rest = rest[line.len()..].strip_prefix('\n').unwrap_or("");
        }
        let grammar = grammar.ok_or_else(|| ModelError::Prompt(format!("{template_id}: no grammar declared")))?;
        PromptTemplate::new(template_id, rest, grammar)
    }

    pub fn load(path: &Path, default_grammar: Option<OutputGrammar>) -> Result<Self, ModelError> {
        let text = std::fs::read_to_string(path).map_err(|e| ModelError::Prompt(format!("{}: {e}", path.display())))?;
        let id = path.file_stem().and_then(|s| s.to_str()).unwrap_or("template");
        PromptTemplate::parse_file_text(id, &text, default_grammar)
    }

    pub fn body(&self) -> &str {
        &self.body
    }

    /// Slots referenced by the body, in first-use order.
    pub fn slots(&self) -> Vec<Slot> {
        let mut out = Vec::new();
        for seg in &self.segments {
            if let Segment::Slot(s) = seg {
                if !out.contains(s) {
                    out.push(*s);
                }
            }
        }
        out
    }

    pub fn render(&self, values: &SlotValues<'_>) -> Result<String, ModelError> {
        let mut out = String::with_capacity(self.body.len());
        for seg in &self.segments {
            match seg {
                Segment::Literal(text) => out.push_str(text),
                Segment::Slot(slot) => {
                    let value = values
                        .get(slot)
                        .ok_or_else(|| ModelError::Prompt(format!("{}: slot {slot} not supplied", self.template_id)))?;
                    out.push_str(value);
                }
            }
        }
        Ok(out)
    }
}

fn parse_segments(body: &str) -> Result<Vec<Segment>, ModelError> {
    let mut segments = Vec::new();
    let mut literal = String::new();
    let mut rest = body;
    while let Some(c) = rest.chars().next() {
        if rest.starts_with("{{") {
            literal.push('{');
            rest = &rest[2..];
        } else if rest.starts_with("}}") {
            literal.push('}');
            rest = &rest[2..];
        } else if c == '{' {
            let close = rest.find('}');
            let name = close.map(|i| &rest[1..i]);
            match name {
                Some(name) if !name.is_empty() && name.chars().all(|c| c.is_ascii_lowercase() || c == '_') => {
                    let slot = Slot::from_name(name).ok_or_else(|| ModelError::Prompt(format!("unknown slot {{{name}}}")))?;
                    if !literal.is_empty() {
                        segments.push(Segment::Literal(std::mem::take(&mut literal)));
                    }
                    segments.push(Segment::Slot(slot));
                    rest = &rest[name.len() + 2..];
                }
                _ => {
                    literal.push('{');
                    rest = &rest[1..];
                }
            }
        } else {
            literal.push(c);
            rest = &rest[c.len_utf8()..];
        }
    }
    if !literal.is_empty() {
        segments.push(Segment::Literal(literal));
    }
    Ok(segments)
}

/// Shipped default prompts. These are reconstructions written for this tool;
/// replace them with tuned prompts via the pipeline config.
pub mod defaults {
    use super::PromptTemplate;

    pub const REWRITE: &str = include_str!("../../templates/rewrite.txt");
    pub const SCORE: &str = include_str!("../../templates/score.txt");
    pub const REASONING: &str = include_str!("../../templates/reasoning.txt");
    pub const QUERY: &str = include_str!("../../templates/query.txt");
    pub const JUDGE: &str = include_str!("../../templates/judge.txt");

    fn build(id: &str, text: &str) -> PromptTemplate {
        PromptTemplate::parse_file_text(id, text, None).expect("shipped template is valid")
    }

    pub fn rewrite() -> PromptTemplate {
        build("rewrite", REWRITE)
    }

    pub fn score() -> PromptTemplate {
        build("score", SCORE)
    }

    pub fn reasoning() -> PromptTemplate {
        build("reasoning", REASONING)
    }

    pub fn query() -> PromptTemplate {
        build("query", QUERY)
    }

    pub fn judge() -> PromptTemplate {
        build("judge", JUDGE)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn renders_slots_and_escapes() {
        let t = PromptTemplate::new("t", "Q={query} {{x}} {\"k\": 1} T={title}", OutputGrammar::ScoreLine).unwrap();
        let values = SlotValues::from([(Slot::Query, "cat"), (Slot::Title, "Cats")]);
        assert_eq!(t.render(&values).unwrap(), "Q=cat {x} {\"k\": 1} T=Cats");
        assert_eq!(t.slots(), vec![Slot::Query, Slot::Title]);
    }

    #[test]
    fn missing_and_unknown_slots() {
        let t = PromptTemplate::new("t", "{query}/{body}", OutputGrammar::ScoreLine).unwrap();
        let err = t.render(&SlotValues::from([(Slot::Query, "x")])).unwrap_err();
        assert!(err.to_string().contains("{body}"));
        assert!(PromptTemplate::new("t", "{nope}", OutputGrammar::ScoreLine).is_err());
    }

    #[test]
    fn header_sets_grammar() {
        let t = PromptTemplate::parse_file_text("x", "# note\n# grammar: order_token\nJudge {query_a}\n", None).unwrap();
        assert_eq!(t.output_grammar, OutputGrammar::OrderToken);
        assert_eq!(t.body(), "Judge {query_a}\n");
        assert!(PromptTemplate::parse_file_text("x", "no header", None).is_err());
        assert!(PromptTemplate::parse_file_text("x", "# grammar: bogus\nx", None).is_err());
    }

    #[test]
    fn shipped_defaults_parse() {
        assert_eq!(defaults::score().output_grammar, OutputGrammar::ReasoningThenScore);
        assert_eq!(defaults::query().output_grammar, OutputGrammar::PlainQuery);
        assert_eq!(defaults::judge().output_grammar, OutputGrammar::OrderToken);
        assert_eq!(defaults::rewrite().output_grammar, OutputGrammar::RewriteText);
        assert_eq!(defaults::reasoning().output_grammar, OutputGrammar::ReasoningThenScore);
        assert!(defaults::judge().slots().contains(&Slot::QueryB));
    }
}
