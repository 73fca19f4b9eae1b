//! Plain-file persistence for a corpus.
//!
//! Layout under the corpus root:
//!
//! ```text
//! calls/<call_id>.json   static call metadata and segmented utterances
//! state.json             partition, labels, votes, statuses, review queue
//! labels.jsonl           append-only label history
//! features.csv           acoustic feature table
//! models/                trained committee members
//! reports/               one report per loop iteration
//! ```
//!
//! `state.json` is replaced atomically (write to a temporary file, then
//! rename), so a crash at any point leaves the previous state readable. Call
//! documents that the state does not reference are ignored on load.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{
    AssignedLabel, Call, CallStatus, ChatRecord, Corpus, DatasetPartition, LabelLog, Utterance,
};
use crate::error::{Error, Result};
use crate::label::Vote;
use crate::pipeline::ReviewQueueItem;

const STATE_VERSION: u32 = 1;

#[derive(Debug, Serialize, Deserialize)]
struct CallDocument {
    version: u32,
    call: Call,
    utterances: Vec<Utterance>,
}

#[derive(Debug, Default, Serialize, Deserialize)]
struct StateDocument {
    version: u32,
    partition: DatasetPartition,
    call_status: BTreeMap<String, CallStatus>,
    labels: BTreeMap<String, AssignedLabel>,
    machine_votes: BTreeMap<String, BTreeMap<String, Vote>>,
    chats: Vec<ChatRecord>,
    review_queue: Vec<ReviewQueueItem>,
}

#[derive(Debug, Clone)]
pub struct CorpusStore {
    root: PathBuf,
}

impl CorpusStore {
    /// Creates the directory layout if needed and returns the store.
    pub fn init(root: impl Into<PathBuf>) -> Result<Self> {
        let store = CorpusStore { root: root.into() };
        for dir in [store.root.clone(), store.calls_dir(), store.models_dir()] {
            fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
        }
        if !store.state_path().exists() {
            store.write_state(&StateDocument {
                version: STATE_VERSION,
                ..Default::default()
            })?;
        }
        Ok(store)
    }

    /// Opens an existing store without creating anything.
    pub fn open(root: impl Into<PathBuf>) -> Result<Self> {
        let store = CorpusStore { root: root.into() };
        if !store.state_path().exists() {
            return Err(Error::Corrupt {
                path: store.root.clone(),
                reason: "not an initialized corpus (state.json missing)".into(),
            });
        }
        Ok(store)
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn calls_dir(&self) -> PathBuf {
        self.root.join("calls")
    }

    pub fn models_dir(&self) -> PathBuf {
        self.root.join("models")
    }

    pub fn state_path(&self) -> PathBuf {
        self.root.join("state.json")
    }

    pub fn features_path(&self) -> PathBuf {
        self.root.join("features.csv")
    }

    pub fn reports_dir(&self) -> PathBuf {
        self.root.join("reports")
    }

    pub fn label_log(&self) -> LabelLog {
        LabelLog::new(self.root.join("labels.jsonl"))
    }

    /// Absolute location of a call's audio.
    pub fn audio_path(&self, call: &Call) -> PathBuf {
        let p = Path::new(&call.audio_path);
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.root.join(p)
        }
    }

    pub fn load(&self) -> Result<Corpus> {
        let state: StateDocument = read_json(&self.state_path())?;
        if state.version != STATE_VERSION {
            return Err(self.corrupt(format!("unsupported state version {}", state.version)));
        }
        state
            .partition
            .check()
            .map_err(|e| self.corrupt(e.to_string()))?;

        let mut calls = Vec::new();
        let mut utterances = Vec::new();
        for (call_id, status) in &state.call_status {
            let path = self.call_path(call_id);
            let doc: CallDocument = read_json(&path)?;
            if doc.call.call_id != *call_id {
                return Err(Error::Corrupt {
                    path,
                    reason: format!("document holds call {}", doc.call.call_id),
                });
            }
            let mut call = doc.call;
            call.status = *status;
            for mut utt in doc.utterances {
                utt.label = state.labels.get(&utt.utterance_id).copied();
                utt.machine_votes = state.machine_votes.get(&utt.utterance_id).cloned();
                utterances.push(utt);
            }
            calls.push(call);
        }
        Ok(Corpus::from_parts(
            calls,
            utterances,
            state.chats,
            state.partition,
            state.review_queue,
        ))
    }

    /// Persists the corpus: new call documents, then the state file in one
    /// atomic replace, then pending label events to the log.
    pub fn commit(&self, corpus: &mut Corpus) -> Result<()> {
        let mut state = StateDocument {
            version: STATE_VERSION,
            partition: corpus.partition().clone(),
            review_queue: corpus.review_queue().to_vec(),
            chats: corpus.chats().cloned().collect(),
            ..Default::default()
        };
        for call in corpus.calls() {
            let path = self.call_path(&call.call_id);
            if !path.exists() {
                let utterances = corpus
                    .call_utterances(&call.call_id)?
                    .into_iter()
                    .map(|u| Utterance {
                        label: None,
                        machine_votes: None,
                        ..u.clone()
                    })
                    .collect();
                let doc = CallDocument {
                    version: STATE_VERSION,
                    call: Call {
                        status: CallStatus::Segmented,
                        ..call.clone()
                    },
                    utterances,
                };
                write_atomic(&path, &serde_json::to_vec_pretty(&doc)?)?;
            }
            state.call_status.insert(call.call_id.clone(), call.status);
        }
        for utt in corpus.utterances() {
            if let Some(label) = utt.label {
                state.labels.insert(utt.utterance_id.clone(), label);
            }
            if let Some(votes) = &utt.machine_votes {
                state
                    .machine_votes
                    .insert(utt.utterance_id.clone(), votes.clone());
            }
        }
        self.write_state(&state)?;
        let events = corpus.take_pending_events();
        self.label_log().append(&events)
    }

    fn write_state(&self, state: &StateDocument) -> Result<()> {
        write_atomic(&self.state_path(), &serde_json::to_vec(state)?)
    }

    fn call_path(&self, call_id: &str) -> PathBuf {
        self.calls_dir().join(format!("{}.json", sanitize(call_id)))
    }

    fn corrupt(&self, reason: String) -> Error {
        Error::Corrupt {
            path: self.state_path(),
            reason,
        }
    }
}

fn sanitize(id: &str) -> String {
    id.chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' { c } else { '_' })
        .collect()
}

pub(crate) fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_slice(&bytes).map_err(|e| Error::Corrupt {
        path: path.to_path_buf(),
        reason: e.to_string(),
    })
}

/// Writes `bytes` to a sibling temporary file and renames it over `path`.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let tmp = path.with_extension("tmp");
    let mut file = fs::File::create(&tmp).map_err(|e| Error::io(&tmp, e))?;
    file.write_all(bytes)
        .and_then(|_| file.sync_all())
        .map_err(|e| Error::io(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::tests::{call_with, utt};
    use crate::label::{LabelSource, SentimentLabel};

    #[test]
    fn commit_then_load_round_trips() {
        let dir = tempfile::tempdir().unwrap();
        let store = CorpusStore::init(dir.path()).unwrap();
        let utts = vec![
            utt("c1", 0.5, 2.0, "a", "how can i help"),
            utt("c1", 2.5, 4.0, "b", "this is the worst"),
        ];
        let mut corpus = Corpus::new();
        corpus.store_call(call_with("c1", &utts), utts.clone()).unwrap();
        corpus
            .apply_label(&utts[1].utterance_id, SentimentLabel::Negative, LabelSource::SeedHuman)
            .unwrap();
        store.commit(&mut corpus).unwrap();
        assert!(corpus.pending_events().is_empty());

        let loaded = store.load().unwrap();
        assert_eq!(loaded, corpus);
        assert_eq!(store.label_log().read().unwrap().len(), 1);
    }

    #[test]
    fn open_refuses_uninitialized_root() {
        let dir = tempfile::tempdir().unwrap();
        assert!(matches!(CorpusStore::open(dir.path()), Err(Error::Corrupt { .. })));
    }

    #[test]
    fn corrupt_state_is_reported() {
        let dir = tempfile::tempdir().unwrap();
        let store = CorpusStore::init(dir.path()).unwrap();
        fs::write(store.state_path(), b"{ not json").unwrap();
        assert!(matches!(store.load(), Err(Error::Corrupt { .. })));
    }

    #[test]
    fn orphan_call_documents_are_ignored() {
        let dir = tempfile::tempdir().unwrap();
        let store = CorpusStore::init(dir.path()).unwrap();
        let utts = vec![utt("c9", 0.5, 2.0, "a", "hello")];
        let doc = CallDocument {
            version: STATE_VERSION,
            call: call_with("c9", &utts),
            utterances: utts,
        };
        write_atomic(&store.call_path("c9"), &serde_json::to_vec(&doc).unwrap()).unwrap();
        assert_eq!(store.load().unwrap().calls().count(), 0);
    }
}
