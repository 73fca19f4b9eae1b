//! Decision-level fusion of committee votes.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::audio;
use crate::error::{Error, Result};
use crate::label::{Polarity, Vote};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Modality {
    Text,
    Audio,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FusionStrategy {
    TextOnly,
    AudioOnly,
    TPlusA,
    Fus1,
    Fus2,
}

impl FusionStrategy {
    pub const ALL: [FusionStrategy; 5] = [
        FusionStrategy::TextOnly,
        FusionStrategy::AudioOnly,
        FusionStrategy::TPlusA,
        FusionStrategy::Fus1,
        FusionStrategy::Fus2,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            FusionStrategy::TextOnly => "text_only",
            FusionStrategy::AudioOnly => "audio_only",
            FusionStrategy::TPlusA => "t_plus_a",
            FusionStrategy::Fus1 => "fus1",
            FusionStrategy::Fus2 => "fus2",
        }
    }
}

impl std::str::FromStr for FusionStrategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        FusionStrategy::ALL
            .into_iter()
            .find(|f| f.as_str() == s)
            .ok_or_else(|| Error::invalid(format!("unknown fusion strategy `{s}`")))
    }
}

/// Votes by classifier name with optional weights (1.0 when unlisted).
#[derive(Debug, Clone, Default, PartialEq)]
pub struct VoteSet {
    pub votes: BTreeMap<String, Vote>,
    pub weights: BTreeMap<String, f64>,
}

impl VoteSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with(mut self, name: &str, vote: Vote, weight: f64) -> Self {
        self.votes.insert(name.to_string(), vote);
        self.weights.insert(name.to_string(), weight);
        self
    }

    pub fn weight(&self, name: &str) -> f64 {
        self.weights.get(name).copied().unwrap_or(1.0)
    }

    pub fn any_negative(&self) -> bool {
        self.votes.values().any(|v| *v == Vote::Negative)
    }
}

/// Weighted vote, ignoring abstentions. Sums within a relative 1e-12 of
/// each other count as a tie and resolve to nonnegative.
pub fn weighted_majority(votes: &VoteSet) -> Result<Polarity> {
    let (mut neg, mut non, mut cast) = (0.0, 0.0, 0usize);
    for (name, vote) in &votes.votes {
        let w = votes.weight(name);
        if !(w >= 0.0) || !w.is_finite() {
            return Err(Error::invalid(format!("weight of `{name}` must be a nonnegative number")));
        }
        match vote.polarity() {
            Some(Polarity::Negative) => neg += w,
            Some(Polarity::Nonnegative) => non += w,
            None => continue,
        }
        cast += 1;
    }
    if cast == 0 {
        return Err(Error::invalid("every vote abstained"));
    }
    if (neg - non).abs() <= 1e-12 * neg.max(non) || neg < non {
        Ok(Polarity::Nonnegative)
    } else {
        Ok(Polarity::Negative)
    }
}

/// Audio negative and at least one text vote negative overrides the text
/// ensemble.
pub fn fuse1(text_votes: &VoteSet, text_label: Polarity, audio_label: Polarity) -> Polarity {
    if audio_label.is_negative() && text_votes.any_negative() {
        Polarity::Negative
    } else {
        text_label
    }
}

/// Audio negative overrides the text ensemble.
pub fn fuse2(text_label: Polarity, audio_label: Polarity) -> Polarity {
    if audio_label.is_negative() {
        Polarity::Negative
    } else {
        text_label
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FusionMember {
    pub name: String,
    pub modality: Modality,
    #[serde(default = "one")]
    pub weight: f64,
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FusionConfig {
    pub strategy: FusionStrategy,
    pub members: Vec<FusionMember>,
}

pub const LEXICON: &str = "lexicon";
pub const LINEAR_UNI_BI: &str = "linear_12";
pub const LINEAR_UNI: &str = "linear_1";

impl Default for FusionConfig {
    fn default() -> Self {
        let member = |name: &str, modality| FusionMember {
            name: name.to_string(),
            modality,
            weight: 1.0,
        };
        FusionConfig {
            strategy: FusionStrategy::Fus2,
            members: vec![
                member(LEXICON, Modality::Text),
                member(LINEAR_UNI_BI, Modality::Text),
                member(LINEAR_UNI, Modality::Text),
                member(audio::ELASTIC_NET, Modality::Audio),
                member(audio::KNN, Modality::Audio),
                member(audio::RANDOM_FOREST, Modality::Audio),
                member(audio::GMM, Modality::Audio),
            ],
        }
    }
}

/// Every strategy's outcome for one utterance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FusionOutcome {
    pub text: Option<Polarity>,
    pub audio: Option<Polarity>,
    pub t_plus_a: Polarity,
    pub fus1: Option<Polarity>,
    pub fus2: Option<Polarity>,
}

impl FusionOutcome {
    pub fn get(&self, strategy: FusionStrategy) -> Option<Polarity> {
        match strategy {
            FusionStrategy::TextOnly => self.text,
            FusionStrategy::AudioOnly => self.audio,
            FusionStrategy::TPlusA => Some(self.t_plus_a),
            FusionStrategy::Fus1 => self.fus1,
            FusionStrategy::Fus2 => self.fus2,
        }
    }
}

impl FusionConfig {
    pub fn load(path: &Path) -> Result<FusionConfig> {
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        let cfg: FusionConfig = serde_json::from_slice(&bytes)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let mut seen = std::collections::BTreeSet::new();
        for m in &self.members {
            if !seen.insert(&m.name) {
                return Err(Error::invalid(format!("member `{}` listed twice", m.name)));
            }
            if !(m.weight >= 0.0) || !m.weight.is_finite() {
                return Err(Error::invalid(format!("weight of `{}` must be nonnegative", m.name)));
            }
        }
        Ok(())
    }

    pub fn members_of(&self, modality: Modality) -> impl Iterator<Item = &FusionMember> {
        self.members.iter().filter(move |m| m.modality == modality)
    }

    /// Votes of the listed members of `modality`; missing votes abstain.
    pub fn vote_set(&self, votes: &BTreeMap<String, Vote>, modality: Option<Modality>) -> VoteSet {
        let mut set = VoteSet::new();
        for m in self.members.iter().filter(|m| modality.is_none_or(|x| x == m.modality)) {
            let v = votes.get(&m.name).copied().unwrap_or(Vote::Abstain);
            set = set.with(&m.name, v, m.weight);
        }
        set
    }

    /// Evaluates every strategy. A modality with no usable vote yields
    /// `None` for the strategies that need it.
    pub fn outcome(&self, votes: &BTreeMap<String, Vote>) -> Result<FusionOutcome> {
        let text_votes = self.vote_set(votes, Some(Modality::Text));
        let text = weighted_majority(&text_votes).ok();
        let audio = weighted_majority(&self.vote_set(votes, Some(Modality::Audio))).ok();
        let t_plus_a = weighted_majority(&self.vote_set(votes, None))?;
        let (fus1, fus2) = match (text, audio) {
            (Some(t), Some(a)) => (Some(fuse1(&text_votes, t, a)), Some(fuse2(t, a))),
            (Some(t), None) => (Some(t), Some(t)),
            _ => (None, None),
        };
        Ok(FusionOutcome {
            text,
            audio,
            t_plus_a,
            fus1,
            fus2,
        })
    }

    /// Label under the configured strategy.
    pub fn decide(&self, votes: &BTreeMap<String, Vote>) -> Result<Polarity> {
        self.outcome(votes)?
            .get(self.strategy)
            .ok_or_else(|| Error::invalid(format!("no usable votes for {}", self.strategy.as_str())))
    }
}
