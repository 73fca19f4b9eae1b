//! Label vocabularies shared by every stage of the pipeline.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::Error;

/// Binary polarity produced by classifiers and stored in the labeled set.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Polarity {
    Negative,
    Nonnegative,
}

impl Polarity {
    pub fn is_negative(self) -> bool {
        self == Polarity::Negative
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Polarity::Negative => "negative",
            Polarity::Nonnegative => "nonnegative",
        }
    }
}

impl fmt::Display for Polarity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// A label as a human may assign it. `Discard` never enters the labeled set.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SentimentLabel {
    Negative,
    Nonnegative,
    Discard,
}

impl SentimentLabel {
    pub fn polarity(self) -> Option<Polarity> {
        match self {
            SentimentLabel::Negative => Some(Polarity::Negative),
            SentimentLabel::Nonnegative => Some(Polarity::Nonnegative),
            SentimentLabel::Discard => None,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            SentimentLabel::Negative => "negative",
            SentimentLabel::Nonnegative => "nonnegative",
            SentimentLabel::Discard => "discard",
        }
    }
}

impl From<Polarity> for SentimentLabel {
    fn from(p: Polarity) -> Self {
        match p {
            Polarity::Negative => SentimentLabel::Negative,
            Polarity::Nonnegative => SentimentLabel::Nonnegative,
        }
    }
}

impl fmt::Display for SentimentLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SentimentLabel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "negative" | "neg" => Ok(SentimentLabel::Negative),
            "nonnegative" | "nonneg" => Ok(SentimentLabel::Nonnegative),
            "discard" => Ok(SentimentLabel::Discard),
            other => Err(Error::invalid(format!("unknown label `{other}`"))),
        }
    }
}

/// Where a label came from. Written once per label event and never rewritten.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LabelSource {
    SeedHuman,
    LoopHuman,
    MachineUnanimous,
    ChatImport,
}

impl LabelSource {
    pub fn is_human(self) -> bool {
        matches!(self, LabelSource::SeedHuman | LabelSource::LoopHuman)
    }
}

/// One committee member's output for one item.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Vote {
    Negative,
    Nonnegative,
    Abstain,
}

impl Vote {
    pub fn polarity(self) -> Option<Polarity> {
        match self {
            Vote::Negative => Some(Polarity::Negative),
            Vote::Nonnegative => Some(Polarity::Nonnegative),
            Vote::Abstain => None,
        }
    }

    pub fn is_negative(self) -> bool {
        self == Vote::Negative
    }
}

impl From<Polarity> for Vote {
    fn from(p: Polarity) -> Self {
        match p {
            Polarity::Negative => Vote::Negative,
            Polarity::Nonnegative => Vote::Nonnegative,
        }
    }
}
