//! Text normalization and length measurement.

use serde::{Deserialize, Serialize};
use unicode_normalization::UnicodeNormalization;

/// Canonical form used for query equality (dedup, duplicate rate, merge keys).
///
/// NFC, trimmed, internal whitespace runs collapsed to one ASCII space, ASCII
/// letters lower-cased. Non-ASCII letters are left untouched.
pub fn normalize_query(text: &str) -> String {
    let nfc: String = text.nfc().collect();
    let mut out = String::with_capacity(nfc.len());
    for (i, word) in nfc.split_whitespace().enumerate() {
        if i > 0 {
            out.push(' ');
        }
        out.extend(word.chars().map(|c| c.to_ascii_lowercase()));
    }
    out
}

/// Unit used when reporting average lengths.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LengthUnit {
    /// Unicode scalar values.
    #[default]
    Chars,
    /// Whitespace-separated tokens.
    WhitespaceTokens,
}

impl LengthUnit {
    pub fn measure(self, text: &str) -> usize {
        match self {
            LengthUnit::Chars => text.chars().count(),
            LengthUnit::WhitespaceTokens => text.split_whitespace().count(),
        }
    }
}

/// Tokens for overlap heuristics: each CJK ideograph is its own token, other
/// alphanumeric runs form words, punctuation and whitespace separate.
pub fn overlap_tokens(text: &str) -> Vec<String> {
    let norm = normalize_query(text);
    let mut tokens = Vec::new();
    let mut word = String::new();
    for c in norm.chars() {
        if is_cjk(c) {
            if !word.is_empty() {
                tokens.push(std::mem::take(&mut word));
            }
            tokens.push(c.to_string());
        } else if c.is_alphanumeric() {
            word.push(c);
        } else if !word.is_empty() {
            tokens.push(std::mem::take(&mut word));
        }
    }
    if !word.is_empty() {
        tokens.push(word);
    }
    tokens
}

fn is_cjk(c: char) -> bool {
    matches!(c as u32,
        0x3040..=0x30FF      // kana
        | 0x3400..=0x4DBF    // ext A
        | 0x4E00..=0x9FFF    // unified
        | 0xAC00..=0xD7AF    // hangul
        | 0xF900..=0xFAFF
        | 0x20000..=0x2FA1F)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn normalization_collapses_whitespace_and_ascii_case() {
        assert_eq!(normalize_query("  Hello\t\tWorld \n"), "hello world");
        assert_eq!(normalize_query("猫咪 视频"), "猫咪 视频");
        // composed vs decomposed e-acute
        assert_eq!(normalize_query("caf\u{0065}\u{0301}"), normalize_query("caf\u{00e9}"));
        // non-ASCII case is kept
        assert_eq!(normalize_query("ÉCOLE"), "École");
    }

    #[test]
    fn lengths() {
        assert_eq!(LengthUnit::Chars.measure("猫咪视频"), 4);
        assert_eq!(LengthUnit::WhitespaceTokens.measure("a b  c"), 3);
    }

    #[test]
    fn cjk_tokens_are_per_character() {
        assert_eq!(overlap_tokens("猫咪 cat-video"), vec!["猫", "咪", "cat", "video"]);
    }
}
