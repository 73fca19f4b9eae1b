//! Calls, utterances, labels, and the labeled/unlabeled dataset partition.
//!
//! [`Corpus`] is the in-memory state. All label mutations go through
//! [`Corpus::apply_label`] (or the chat import), which keeps the partition
//! invariants:
//!
//! * the labeled set and the unlabeled set never intersect;
//! * the labeled set never shrinks;
//! * a labeled call utterance sits in both the text and the audio view, a
//!   chat record only in the text view;
//! * `discard` only comes from a human and never enters the labeled set.
//!
//! Every accepted label is also queued as a [`LabelEvent`] for the
//! append-only label log; [`store::CorpusStore`] drains that queue when it
//! commits.

pub mod log;
pub mod store;

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::label::{LabelSource, Polarity, SentimentLabel, Vote};
use crate::pipeline::{QueueStatus, ReviewQueueItem};

pub use self::log::{read_chat_file, read_label_log, write_chat_file, LabelEvent, LabelLog};
pub use self::store::CorpusStore;

/// A closed time interval in seconds on the original call timeline.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Span {
    pub start: f64,
    pub end: f64,
}

impl Span {
    pub fn new(start: f64, end: f64) -> Self {
        Span { start, end }
    }

    pub fn duration(&self) -> f64 {
        self.end - self.start
    }

    pub fn midpoint(&self) -> f64 {
        0.5 * (self.start + self.end)
    }

    pub fn intersect(&self, other: &Span) -> Option<Span> {
        let start = self.start.max(other.start);
        let end = self.end.min(other.end);
        (end > start).then_some(Span { start, end })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    Csr,
    Customer,
    Unknown,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CallStatus {
    Raw,
    Segmented,
    Predicted,
    Flagged,
    Reviewed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Call {
    pub call_id: String,
    /// Path of the call audio, relative to the corpus root when not absolute.
    pub audio_path: String,
    pub sample_rate: u32,
    pub duration: f64,
    /// Utterance ids ordered by start time.
    pub utterances: Vec<String>,
    pub status: CallStatus,
    /// Set when no role cue phrase was found and the first speaker was
    /// assumed to be the CSR.
    #[serde(default)]
    pub role_low_confidence: bool,
}

impl Call {
    pub fn validate(&self) -> Result<()> {
        if self.call_id.is_empty() {
            return Err(Error::invalid("call id is empty"));
        }
        if self.sample_rate == 0 {
            return Err(Error::invalid(format!("call {}: sample rate is 0", self.call_id)));
        }
        if !(self.duration > 0.0 && self.duration.is_finite()) {
            return Err(Error::invalid(format!(
                "call {}: duration must be positive, got {}",
                self.call_id, self.duration
            )));
        }
        Ok(())
    }

    /// Duration in minutes.
    pub fn minutes(&self) -> f64 {
        self.duration / 60.0
    }
}

/// A label together with its provenance; one cannot exist without the other.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct AssignedLabel {
    pub value: SentimentLabel,
    pub source: LabelSource,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Utterance {
    pub utterance_id: String,
    pub call_id: String,
    pub start: f64,
    pub end: f64,
    pub speaker_id: String,
    pub role: Role,
    pub transcript: String,
    /// Voiced audio slice; `None` marks a non-speech record.
    pub slice: Option<Span>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<AssignedLabel>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub machine_votes: Option<BTreeMap<String, Vote>>,
}

impl Utterance {
    pub fn span(&self) -> Span {
        Span::new(self.start, self.end)
    }

    /// The audio span used for features and playback.
    pub fn audio_span(&self) -> Span {
        self.slice.unwrap_or_else(|| self.span())
    }

    pub fn is_speech(&self) -> bool {
        self.slice.is_some()
    }

    pub fn polarity(&self) -> Option<Polarity> {
        self.label.and_then(|l| l.value.polarity())
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.end > self.start) || !self.start.is_finite() || !self.end.is_finite() {
            return Err(Error::invalid(format!(
                "utterance {}: end {} must exceed start {}",
                self.utterance_id, self.end, self.start
            )));
        }
        if self.transcript.trim().is_empty() && self.is_speech() {
            return Err(Error::invalid(format!(
                "utterance {}: empty transcript on a speech utterance",
                self.utterance_id
            )));
        }
        if let Some(slice) = self.slice {
            if !(slice.end > slice.start) {
                return Err(Error::invalid(format!(
                    "utterance {}: empty audio slice",
                    self.utterance_id
                )));
            }
        }
        Ok(())
    }

    /// Same record ignoring labels and machine votes.
    fn same_content(&self, other: &Utterance) -> bool {
        self.utterance_id == other.utterance_id
            && self.call_id == other.call_id
            && self.start == other.start
            && self.end == other.end
            && self.speaker_id == other.speaker_id
            && self.role == other.role
            && self.transcript == other.transcript
            && self.slice == other.slice
    }
}

/// Content-derived utterance id: identical segmentation yields identical ids.
pub fn utterance_id(call_id: &str, start: f64, end: f64) -> String {
    let mut hasher = Sha256::new();
    hasher.update(format!("{call_id}|{start:.3}|{end:.3}").as_bytes());
    let digest = hasher.finalize();
    format!("u{}", hex::encode(&digest[..8]))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChatRecord {
    pub chat_id: String,
    pub text: String,
    pub label: SentimentLabel,
}

/// The labeled/unlabeled split.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct DatasetPartition {
    /// Labeled items with text: call utterance ids and chat ids.
    pub labeled_text: BTreeSet<String>,
    /// Labeled call utterances with audio.
    pub labeled_audio: BTreeSet<String>,
    pub unlabeled: BTreeSet<String>,
    /// Utterances a human discarded; never labeled, never unlabeled again.
    pub discarded: BTreeSet<String>,
    pub iteration: u32,
}

impl DatasetPartition {
    pub fn is_labeled(&self, id: &str) -> bool {
        self.labeled_text.contains(id)
    }

    /// Size of the labeled set (text view, which contains every labeled item).
    pub fn labeled_len(&self) -> usize {
        self.labeled_text.len()
    }

    /// Checks the structural invariants; used by tests and on load.
    pub fn check(&self) -> Result<()> {
        if let Some(id) = self.labeled_text.intersection(&self.unlabeled).next() {
            return Err(Error::invalid(format!("{id} is both labeled and unlabeled")));
        }
        if let Some(id) = self.labeled_audio.difference(&self.labeled_text).next() {
            return Err(Error::invalid(format!("{id} labeled for audio but not text")));
        }
        if let Some(id) = self
            .discarded
            .iter()
            .find(|id| self.labeled_text.contains(*id) || self.unlabeled.contains(*id))
        {
            return Err(Error::invalid(format!("discarded item {id} still partitioned")));
        }
        Ok(())
    }
}

/// What a label application changed.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PartitionDelta {
    pub labeled: usize,
    pub relabeled: usize,
    pub discarded: usize,
}

impl PartitionDelta {
    pub fn merge(&mut self, other: PartitionDelta) {
        self.labeled += other.labeled;
        self.relabeled += other.relabeled;
        self.discarded += other.discarded;
    }
}

/// In-memory corpus state.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Corpus {
    calls: BTreeMap<String, Call>,
    utterances: BTreeMap<String, Utterance>,
    chats: BTreeMap<String, ChatRecord>,
    partition: DatasetPartition,
    review_queue: Vec<ReviewQueueItem>,
    pending_events: Vec<LabelEvent>,
}

impl Corpus {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn partition(&self) -> &DatasetPartition {
        &self.partition
    }

    pub fn iteration(&self) -> u32 {
        self.partition.iteration
    }

    pub fn calls(&self) -> impl Iterator<Item = &Call> {
        self.calls.values()
    }

    pub fn call(&self, call_id: &str) -> Result<&Call> {
        self.calls
            .get(call_id)
            .ok_or_else(|| Error::not_found("call", call_id))
    }

    pub fn utterance(&self, utterance_id: &str) -> Result<&Utterance> {
        self.utterances
            .get(utterance_id)
            .ok_or_else(|| Error::not_found("utterance", utterance_id))
    }

    pub fn utterances(&self) -> impl Iterator<Item = &Utterance> {
        self.utterances.values()
    }

    /// Utterances of one call in time order.
    pub fn call_utterances(&self, call_id: &str) -> Result<Vec<&Utterance>> {
        let call = self.call(call_id)?;
        Ok(call
            .utterances
            .iter()
            .filter_map(|id| self.utterances.get(id))
            .collect())
    }

    pub fn chats(&self) -> impl Iterator<Item = &ChatRecord> {
        self.chats.values()
    }

    pub fn review_queue(&self) -> &[ReviewQueueItem] {
        &self.review_queue
    }

    pub fn queue_item(&self, call_id: &str) -> Option<&ReviewQueueItem> {
        self.review_queue
            .iter()
            .rev()
            .find(|item| item.call_id == call_id)
    }

    /// The open (not complete) queue entry for a call, if any.
    pub fn open_queue_item(&self, call_id: &str) -> Option<&ReviewQueueItem> {
        self.review_queue
            .iter()
            .find(|item| item.call_id == call_id && item.status != QueueStatus::Complete)
    }

    pub(crate) fn queue_mut(&mut self) -> &mut Vec<ReviewQueueItem> {
        &mut self.review_queue
    }

    pub(crate) fn set_iteration(&mut self, iteration: u32) {
        self.partition.iteration = iteration;
    }

    pub(crate) fn set_call_status(&mut self, call_id: &str, status: CallStatus) -> Result<()> {
        let call = self
            .calls
            .get_mut(call_id)
            .ok_or_else(|| Error::not_found("call", call_id))?;
        call.status = status;
        Ok(())
    }

    pub(crate) fn set_machine_votes(
        &mut self,
        utterance_id: &str,
        votes: BTreeMap<String, Vote>,
    ) -> Result<()> {
        let utt = self
            .utterances
            .get_mut(utterance_id)
            .ok_or_else(|| Error::not_found("utterance", utterance_id))?;
        utt.machine_votes = Some(votes);
        Ok(())
    }

    /// Label events not yet written to the label log.
    pub fn pending_events(&self) -> &[LabelEvent] {
        &self.pending_events
    }

    pub(crate) fn take_pending_events(&mut self) -> Vec<LabelEvent> {
        std::mem::take(&mut self.pending_events)
    }

    /// Stores a segmented call. Idempotent for identical content; a different
    /// call under an existing id is a conflict.
    pub fn store_call(&mut self, call: Call, utterances: Vec<Utterance>) -> Result<String> {
        call.validate()?;
        validate_call_utterances(&call, &utterances)?;

        if let Some(existing) = self.calls.get(&call.call_id) {
            let same_call = existing.call_id == call.call_id
                && existing.audio_path == call.audio_path
                && existing.sample_rate == call.sample_rate
                && existing.duration == call.duration
                && existing.utterances == call.utterances
                && existing.role_low_confidence == call.role_low_confidence;
            let same_utts = utterances.iter().all(|u| {
                self.utterances
                    .get(&u.utterance_id)
                    .is_some_and(|e| e.same_content(u))
            });
            return if same_call && same_utts {
                Ok(call.call_id.clone())
            } else {
                Err(Error::Conflict(format!(
                    "call {} already stored with different content",
                    call.call_id
                )))
            };
        }
        if let Some(u) = utterances
            .iter()
            .find(|u| self.utterances.contains_key(&u.utterance_id))
        {
            return Err(Error::Conflict(format!(
                "utterance {} already belongs to another call",
                u.utterance_id
            )));
        }

        for utt in utterances {
            if utt.is_speech() && !self.partition.discarded.contains(&utt.utterance_id) {
                match utt.label.and_then(|l| l.value.polarity()) {
                    Some(_) => {
                        self.partition.labeled_text.insert(utt.utterance_id.clone());
                        self.partition.labeled_audio.insert(utt.utterance_id.clone());
                    }
                    None => {
                        self.partition.unlabeled.insert(utt.utterance_id.clone());
                    }
                }
            }
            self.utterances.insert(utt.utterance_id.clone(), utt);
        }
        let id = call.call_id.clone();
        self.calls.insert(id.clone(), call);
        Ok(id)
    }

    /// Applies one label to a call utterance.
    ///
    /// Binary labels move the utterance from the unlabeled set into both
    /// labeled views; relabeling an already labeled utterance replaces its
    /// current label while the log keeps the full history. `discard` removes
    /// an unlabeled utterance for good.
    pub fn apply_label(
        &mut self,
        utterance_id: &str,
        label: SentimentLabel,
        source: LabelSource,
    ) -> Result<PartitionDelta> {
        if label == SentimentLabel::Discard && !source.is_human() {
            return Err(Error::invalid(format!(
                "{utterance_id}: only a human may discard an utterance"
            )));
        }
        if source == LabelSource::ChatImport {
            return Err(Error::invalid("chat_import labels only come from a chat import"));
        }
        let utt = self
            .utterances
            .get(utterance_id)
            .ok_or_else(|| Error::not_found("utterance", utterance_id))?;
        if !utt.is_speech() {
            return Err(Error::invalid(format!(
                "{utterance_id} is a non-speech record and cannot be labeled"
            )));
        }
        if self.partition.discarded.contains(utterance_id) {
            return Err(Error::Conflict(format!("{utterance_id} was discarded")));
        }

        let already_labeled = self.partition.is_labeled(utterance_id);
        let mut delta = PartitionDelta::default();
        match label.polarity() {
            Some(_) => {
                self.partition.unlabeled.remove(utterance_id);
                self.partition.labeled_text.insert(utterance_id.to_string());
                self.partition.labeled_audio.insert(utterance_id.to_string());
                if already_labeled {
                    delta.relabeled = 1;
                } else {
                    delta.labeled = 1;
                }
            }
            None => {
                if already_labeled {
                    return Err(Error::Conflict(format!(
                        "{utterance_id} is already labeled; labeled items cannot be discarded"
                    )));
                }
                self.partition.unlabeled.remove(utterance_id);
                self.partition.discarded.insert(utterance_id.to_string());
                delta.discarded = 1;
            }
        }

        let utt = self.utterances.get_mut(utterance_id).expect("checked above");
        utt.label = Some(AssignedLabel {
            value: label,
            source,
        });
        self.pending_events.push(LabelEvent::now(
            utterance_id,
            label,
            source,
            self.partition.iteration,
        ));
        Ok(delta)
    }

    /// Adds chat records to the text view only. Existing chat ids are
    /// skipped; a `discard` label rejects the record.
    pub fn import_chat(&mut self, records: Vec<ChatRecord>) -> ChatImportReport {
        let mut report = ChatImportReport::default();
        for record in records {
            if record.label == SentimentLabel::Discard {
                report.rejected.push(record.chat_id);
                continue;
            }
            if self.chats.contains_key(&record.chat_id)
                || self.utterances.contains_key(&record.chat_id)
            {
                ::log::warn!("chat {} already imported, skipping", record.chat_id);
                report.skipped += 1;
                continue;
            }
            self.partition.labeled_text.insert(record.chat_id.clone());
            self.pending_events.push(LabelEvent::now(
                &record.chat_id,
                record.label,
                LabelSource::ChatImport,
                self.partition.iteration,
            ));
            self.chats.insert(record.chat_id.clone(), record);
            report.imported += 1;
        }
        report
    }

    /// Labeled text items: (id, text, polarity), utterances first then chats.
    pub fn labeled_text_items(&self) -> Vec<(&str, &str, Polarity)> {
        let mut items = Vec::new();
        for id in &self.partition.labeled_text {
            if let Some(u) = self.utterances.get(id) {
                if let Some(p) = u.polarity() {
                    items.push((u.utterance_id.as_str(), u.transcript.as_str(), p));
                }
            } else if let Some(c) = self.chats.get(id) {
                if let Some(p) = c.label.polarity() {
                    items.push((c.chat_id.as_str(), c.text.as_str(), p));
                }
            }
        }
        items
    }

    /// Labeled audio utterances.
    pub fn labeled_audio_items(&self) -> Vec<&Utterance> {
        self.partition
            .labeled_audio
            .iter()
            .filter_map(|id| self.utterances.get(id))
            .collect()
    }

    pub fn unlabeled_items(&self) -> Vec<&Utterance> {
        self.partition
            .unlabeled
            .iter()
            .filter_map(|id| self.utterances.get(id))
            .collect()
    }

    pub(crate) fn from_parts(
        calls: Vec<Call>,
        utterances: Vec<Utterance>,
        chats: Vec<ChatRecord>,
        partition: DatasetPartition,
        review_queue: Vec<ReviewQueueItem>,
    ) -> Self {
        Corpus {
            calls: calls.into_iter().map(|c| (c.call_id.clone(), c)).collect(),
            utterances: utterances
                .into_iter()
                .map(|u| (u.utterance_id.clone(), u))
                .collect(),
            chats: chats.into_iter().map(|c| (c.chat_id.clone(), c)).collect(),
            partition,
            review_queue,
            pending_events: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChatImportReport {
    pub imported: usize,
    pub skipped: usize,
    pub rejected: Vec<String>,
}

fn validate_call_utterances(call: &Call, utterances: &[Utterance]) -> Result<()> {
    let ids: Vec<&str> = utterances.iter().map(|u| u.utterance_id.as_str()).collect();
    if ids != call.utterances.iter().map(String::as_str).collect::<Vec<_>>() {
        return Err(Error::invalid(format!(
            "call {}: utterance list does not match the supplied utterances",
            call.call_id
        )));
    }
    let mut last_end_by_speaker: BTreeMap<&str, f64> = BTreeMap::new();
    let mut last_start = f64::NEG_INFINITY;
    for utt in utterances {
        utt.validate()?;
        if utt.call_id != call.call_id {
            return Err(Error::invalid(format!(
                "utterance {} belongs to call {}, not {}",
                utt.utterance_id, utt.call_id, call.call_id
            )));
        }
        if utt.start < last_start {
            return Err(Error::invalid(format!(
                "call {}: utterances not ordered by start time",
                call.call_id
            )));
        }
        last_start = utt.start;
        if let Some(prev_end) = last_end_by_speaker.get(utt.speaker_id.as_str()) {
            if utt.start < *prev_end {
                return Err(Error::invalid(format!(
                    "call {}: overlapping utterances for speaker {}",
                    call.call_id, utt.speaker_id
                )));
            }
        }
        last_end_by_speaker.insert(utt.speaker_id.as_str(), utt.end);
        if utt.end > call.duration + 1e-6 {
            return Err(Error::invalid(format!(
                "utterance {} ends after the call",
                utt.utterance_id
            )));
        }
    }
    Ok(())
}
