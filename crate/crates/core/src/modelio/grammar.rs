//! Reply parsers for each output grammar.

use serde::{Deserialize, Serialize};

use super::ModelError;
use crate::corpus::RelevanceLabel;

pub const CANNOT_REWRITE: &str = "CANNOT_REWRITE";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScoreJudgment {
    pub label: RelevanceLabel,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rationale: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OrderVerdict {
    AMoreRelevant,
    BMoreRelevant,
    Tie,
}

impl OrderVerdict {
    /// The verdict with A and B exchanged.
    pub fn swapped(self) -> Self {
        match self {
            OrderVerdict::AMoreRelevant => OrderVerdict::BMoreRelevant,
            OrderVerdict::BMoreRelevant => OrderVerdict::AMoreRelevant,
            OrderVerdict::Tie => OrderVerdict::Tie,
        }
    }

    pub fn token(self) -> &'static str {
        match self {
            OrderVerdict::AMoreRelevant => "A",
            OrderVerdict::BMoreRelevant => "B",
            OrderVerdict::Tie => "tie",
        }
    }
}

fn split_last_line(reply: &str) -> Option<(&str, &str)> {
    let trimmed = reply.trim_end();
    let last_start = trimmed.rfind('\n').map_or(0, |i| i + 1);
    let last = trimmed[last_start..].trim();
    (!last.is_empty()).then(|| (&trimmed[..last_start], last))
}

/// `label: <d>` on the final non-empty line; preceding text is the rationale.
pub fn parse_score_reply(reply: &str) -> Result<ScoreJudgment, ModelError> {
    let err = || ModelError::ScoreParse { raw: reply.to_string() };
    let (head, last) = split_last_line(reply).ok_or_else(err)?;
    let digit = last.strip_prefix("label:").map(str::trim).ok_or_else(err)?;
    let label = match digit {
        "0" | "1" | "2" | "3" => RelevanceLabel::new(digit.parse::<i64>().map_err(|_| err())?).map_err(|_| err())?,
        _ => return Err(err()),
    };
    let rationale = Some(head.trim()).filter(|s| !s.is_empty()).map(str::to_string);
    Ok(ScoreJudgment { label, rationale })
}

pub fn parse_order_reply(reply: &str) -> Result<OrderVerdict, ModelError> {
    let err = || ModelError::JudgeParse { raw: reply.to_string() };
    let (_, last) = split_last_line(reply).ok_or_else(err)?;
    match last.strip_prefix("order:").map(str::trim) {
        Some("A") => Ok(OrderVerdict::AMoreRelevant),
        Some("B") => Ok(OrderVerdict::BMoreRelevant),
        Some("tie") => Ok(OrderVerdict::Tie),
        _ => Err(err()),
    }
}

/// First non-empty line, trimmed.
pub fn parse_query_reply(reply: &str) -> Result<String, ModelError> {
    reply
        .lines()
        .map(str::trim)
        .find(|l| !l.is_empty())
        .map(str::to_string)
        .ok_or_else(|| ModelError::Generation { raw: reply.to_string() })
}

/// `None` when the model declines.
pub fn parse_rewrite_reply(reply: &str) -> Option<String> {
    let text = reply.trim();
    (!text.is_empty() && text != CANNOT_REWRITE).then(|| text.to_string())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn score_reply_with_rationale() {
        let j = parse_score_reply("The video is about cats.\nIt matches.\n\n label: 3 \n").unwrap();
        assert_eq!(j.label, RelevanceLabel::THREE);
        assert_eq!(j.rationale.as_deref(), Some("The video is about cats.\nIt matches."));
        let bare = parse_score_reply("label: 0").unwrap();
        assert_eq!((bare.label, bare.rationale), (RelevanceLabel::ZERO, None));
    }

    #[test]
    fn score_reply_violations() {
        for bad in ["label: 5", "label: ", "", "label 3", "label: 3 extra", "label: 3\nmore", "label: -1"] {
            let err = parse_score_reply(bad).unwrap_err();
            assert_eq!(err, ModelError::ScoreParse { raw: bad.to_string() }, "{bad:?}");
        }
    }

    #[test]
    fn order_tokens() {
        assert_eq!(parse_order_reply("thinking\norder: A").unwrap(), OrderVerdict::AMoreRelevant);
        assert_eq!(parse_order_reply("order: B\n").unwrap(), OrderVerdict::BMoreRelevant);
        assert_eq!(parse_order_reply("order: tie").unwrap(), OrderVerdict::Tie);
        assert!(matches!(parse_order_reply("order: C"), Err(ModelError::JudgeParse { .. })));
        assert!(parse_order_reply("A").is_err());
    }

    #[test]
    fn query_and_rewrite() {
        assert_eq!(parse_query_reply("\n  cat videos \nextra").unwrap(), "cat videos");
        assert!(parse_query_reply(" \n ").is_err());
        assert_eq!(parse_rewrite_reply(" text "), Some("text".into()));
        assert_eq!(parse_rewrite_reply("CANNOT_REWRITE\n"), None);
        assert_eq!(parse_rewrite_reply(""), None);
    }
}
