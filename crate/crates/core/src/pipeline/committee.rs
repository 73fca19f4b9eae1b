//! Training and querying the text and audio committees.

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::audio::{self, AudioCommittee, AudioCommitteeConfig};
use crate::corpus::Corpus;
use crate::error::{Error, Result};
use crate::features::{FeatureTable, FeatureVector39};
use crate::fusion::{Modality, LEXICON, LINEAR_UNI, LINEAR_UNI_BI};
use crate::label::{Polarity, Vote};
use crate::model_file::{load_model, save_model};
use crate::text::{
    lexicon_classify, predict_linear, train_linear, ExternalClassifier, Lexicon, LexiconConfig,
    LinearTextConfig, LinearTextModel,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearMember {
    pub name: String,
    #[serde(default)]
    pub config: LinearTextConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExternalMember {
    pub name: String,
    pub endpoint: String,
    /// Text members send the transcript, audio members the feature vector.
    pub modality: Modality,
    #[serde(default = "default_timeout_ms")]
    pub timeout_ms: u64,
}

fn default_timeout_ms() -> u64 {
    2000
}

/// Members active for iterations in `[from_iteration, until_iteration)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScheduleEntry {
    pub from_iteration: u32,
    #[serde(default)]
    pub until_iteration: Option<u32>,
    pub members: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CommitteeConfig {
    pub lexicon: LexiconConfig,
    /// Bundled lexicon when absent.
    pub lexicon_path: Option<PathBuf>,
    pub linear: Vec<LinearMember>,
    pub external: Vec<ExternalMember>,
    pub audio: AudioCommitteeConfig,
    /// Empty means every member is active in every iteration.
    pub schedule: Vec<ScheduleEntry>,
}

impl Default for CommitteeConfig {
    fn default() -> Self {
        CommitteeConfig {
            lexicon: LexiconConfig::default(),
            lexicon_path: None,
            linear: vec![
                LinearMember {
                    name: LINEAR_UNI_BI.into(),
                    config: LinearTextConfig::default(),
                },
                LinearMember {
                    name: LINEAR_UNI.into(),
                    config: LinearTextConfig {
                        ngram_orders: vec![1],
                        ..LinearTextConfig::default()
                    },
                },
            ],
            external: Vec::new(),
            audio: AudioCommitteeConfig::default(),
            schedule: Vec::new(),
        }
    }
}

impl CommitteeConfig {
    pub fn member_names(&self) -> Vec<String> {
        let mut names = vec![LEXICON.to_string()];
        names.extend(self.linear.iter().map(|m| m.name.clone()));
        names.extend([audio::ELASTIC_NET, audio::KNN, audio::RANDOM_FOREST, audio::GMM].map(String::from));
        names.extend(self.external.iter().map(|m| m.name.clone()));
        names
    }

    pub fn validate(&self) -> Result<()> {
        let names = self.member_names();
        let unique: BTreeSet<&String> = names.iter().collect();
        if unique.len() != names.len() {
            return Err(Error::invalid("committee member names must be unique"));
        }
        for m in &self.linear {
            m.config.validate()?;
        }
        for e in &self.schedule {
            if let Some(u) = e.until_iteration {
                if u <= e.from_iteration {
                    return Err(Error::invalid("schedule range is empty"));
                }
            }
            if let Some(bad) = e.members.iter().find(|m| !unique.contains(m)) {
                return Err(Error::invalid(format!("schedule names unknown member `{bad}`")));
            }
        }
        Ok(())
    }

    pub fn active_members(&self, iteration: u32) -> BTreeSet<String> {
        let covering: Vec<&ScheduleEntry> = self
            .schedule
            .iter()
            .filter(|e| iteration >= e.from_iteration && e.until_iteration.is_none_or(|u| iteration < u))
            .collect();
        if covering.is_empty() {
            return self.member_names().into_iter().collect();
        }
        covering.iter().flat_map(|e| e.members.iter().cloned()).collect()
    }

    fn load_lexicon(&self) -> Result<Lexicon> {
        match &self.lexicon_path {
            Some(p) => Lexicon::load(p),
            None => Ok(Lexicon::bundled()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TextCommittee {
    pub lexicon: Lexicon,
    pub lexicon_config: LexiconConfig,
    pub linear: Vec<(String, LinearTextModel)>,
}

impl TextCommittee {
    pub fn train(items: &[(&str, &str, Polarity)], config: &CommitteeConfig) -> Result<TextCommittee> {
        let docs: Vec<(&str, Polarity)> = items.iter().map(|(_, t, p)| (*t, *p)).collect();
        let linear = config
            .linear
            .iter()
            .map(|m| Ok((m.name.clone(), train_linear(&docs, &m.config)?)))
            .collect::<Result<Vec<_>>>()?;
        Ok(TextCommittee {
            lexicon: config.load_lexicon()?,
            lexicon_config: config.lexicon,
            linear,
        })
    }

    pub fn predict(&self, text: &str) -> BTreeMap<String, Polarity> {
        let mut out = BTreeMap::new();
        out.insert(LEXICON.to_string(), lexicon_classify(text, &self.lexicon, &self.lexicon_config).label);
        for (name, model) in &self.linear {
            out.insert(name.clone(), predict_linear(model, text).0);
        }
        out
    }

    fn finish_load(mut self) -> Result<Self> {
        self.linear = self
            .linear
            .into_iter()
            .map(|(n, m)| Ok((n, m.finish_load()?)))
            .collect::<Result<_>>()?;
        Ok(self)
    }
}

/// Fitted models as written to disk.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CommitteeModels {
    pub iteration: u32,
    pub text: TextCommittee,
    pub audio: AudioCommittee,
    pub text_training_size: usize,
    pub audio_training_size: usize,
}

impl CommitteeModels {
    pub const KIND: &'static str = "committees";
    pub const FILE: &'static str = "committees.json";
}

/// Fitted committees plus the external clients, ready to vote.
#[derive(Debug, Clone)]
pub struct Committees {
    pub models: CommitteeModels,
    pub active: BTreeSet<String>,
    external: Vec<(ExternalMember, ExternalClassifier)>,
}

/// Labeled audio rows `(utterance_id, features, label)` and unlabeled rows.
pub type AudioRows = (Vec<(String, Vec<f64>, Polarity)>, Vec<(String, Vec<f64>)>);

pub fn audio_training_rows(corpus: &Corpus, features: &FeatureTable) -> AudioRows {
    let labeled = corpus
        .labeled_audio_items()
        .into_iter()
        .filter_map(|u| {
            let p = u.polarity()?;
            let f = features.get(&u.utterance_id)?;
            Some((u.utterance_id.clone(), f.0.to_vec(), p))
        })
        .collect();
    let unlabeled = corpus
        .unlabeled_items()
        .into_iter()
        .filter_map(|u| features.get(&u.utterance_id).map(|f| (u.utterance_id.clone(), f.0.to_vec())))
        .collect();
    (labeled, unlabeled)
}

impl Committees {
    pub fn train(corpus: &Corpus, features: &FeatureTable, config: &CommitteeConfig) -> Result<Committees> {
        config.validate()?;
        let text_items = corpus.labeled_text_items();
        let text = TextCommittee::train(&text_items, config)?;
        let (labeled, unlabeled) = audio_training_rows(corpus, features);
        let audio = AudioCommittee::train(&labeled, &unlabeled, &config.audio)?;
        let models = CommitteeModels {
            iteration: corpus.iteration(),
            text,
            audio,
            text_training_size: text_items.len(),
            audio_training_size: labeled.len(),
        };
        Ok(Self::from_models(models, config))
    }

    pub fn from_models(models: CommitteeModels, config: &CommitteeConfig) -> Committees {
        let external = config
            .external
            .iter()
            .map(|m| {
                let client = ExternalClassifier::with_timeout(m.endpoint.clone(), Duration::from_millis(m.timeout_ms));
                (m.clone(), client)
            })
            .collect();
        Committees {
            active: config.active_members(models.iteration),
            models,
            external,
        }
    }

    pub fn save(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        save_model(&dir.join(CommitteeModels::FILE), CommitteeModels::KIND, &self.models)
    }

    pub fn load(dir: &Path, config: &CommitteeConfig) -> Result<Committees> {
        let mut models: CommitteeModels = load_model(&dir.join(CommitteeModels::FILE), CommitteeModels::KIND)?;
        models.text = models.text.finish_load()?;
        Ok(Self::from_models(models, config))
    }

    /// Votes of every active member. Audio members abstain without a
    /// feature vector.
    pub fn votes(&self, text: &str, features: Option<&FeatureVector39>) -> BTreeMap<String, Vote> {
        let mut out: BTreeMap<String, Vote> = self
            .models
            .text
            .predict(text)
            .into_iter()
            .map(|(k, p)| (k, Vote::from(p)))
            .collect();
        let audio_votes = features.and_then(|f| self.models.audio.votes(&f.0).ok());
        for name in [audio::ELASTIC_NET, audio::KNN, audio::RANDOM_FOREST, audio::GMM] {
            let v = audio_votes.as_ref().and_then(|m| m.get(name).copied()).unwrap_or(Vote::Abstain);
            out.insert(name.to_string(), v);
        }
        for (m, client) in &self.external {
            if !self.active.contains(&m.name) {
                continue;
            }
            let v = match m.modality {
                Modality::Text => client.classify(text).vote,
                Modality::Audio => match features {
                    Some(f) => client.classify_features(&f.0).vote,
                    None => Vote::Abstain,
                },
            };
            out.insert(m.name.clone(), v);
        }
        out.retain(|k, _| self.active.contains(k));
        out
    }
}
