use std::fmt;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use super::CorpusError;

/// Four-level graded relevance.
///
/// | label | meaning |
/// |-------|---------|
/// | 3 | fully and precisely satisfies the intent |
/// | 2 | generally satisfies it, non-key elements missing |
/// | 1 | key entities kept, significant aspects unmatched |
/// | 0 | no meaningful relevance |
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct RelevanceLabel(u8);

impl RelevanceLabel {
    pub const ZERO: RelevanceLabel = RelevanceLabel(0);
    pub const ONE: RelevanceLabel = RelevanceLabel(1);
    pub const TWO: RelevanceLabel = RelevanceLabel(2);
    pub const THREE: RelevanceLabel = RelevanceLabel(3);

    /// All labels in ascending order of relevance.
    pub const ALL: [RelevanceLabel; 4] = [Self::ZERO, Self::ONE, Self::TWO, Self::THREE];

    pub fn new(value: i64) -> Result<Self, CorpusError> {
        match value {
            0..=3 => Ok(RelevanceLabel(value as u8)),
            other => Err(CorpusError::LabelOutOfRange(other)),
        }
    }

    pub fn value(self) -> u8 {
        self.0
    }

    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl TryFrom<i64> for RelevanceLabel {
    type Error = CorpusError;

    fn try_from(value: i64) -> Result<Self, Self::Error> {
        RelevanceLabel::new(value)
    }
}

impl From<RelevanceLabel> for u8 {
    fn from(label: RelevanceLabel) -> u8 {
        label.0
    }
}

impl fmt::Display for RelevanceLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl std::str::FromStr for RelevanceLabel {
    type Err = CorpusError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let value: i64 = s.trim().parse().map_err(|_| CorpusError::InvalidLabel(s.to_string()))?;
        RelevanceLabel::new(value)
    }
}

impl Serialize for RelevanceLabel {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_u8(self.0)
    }
}

impl<'de> Deserialize<'de> for RelevanceLabel {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let value = i64::deserialize(deserializer)?;
        RelevanceLabel::new(value).map_err(serde::de::Error::custom)
    }
}
