//! Human labels entering the loop: seed annotation and call reviews.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::QueueStatus;
use crate::corpus::{CallStatus, Corpus, PartitionDelta};
use crate::error::{Error, Result};
use crate::label::{LabelSource, SentimentLabel};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReviewLabel {
    pub utterance_id: String,
    pub label: SentimentLabel,
}

/// Applies a reviewed call's labels and completes its queue entry. The
/// batch is validated as a whole; on any error nothing is applied.
pub fn ingest_review(corpus: &mut Corpus, call_id: &str, labels: &[ReviewLabel]) -> Result<PartitionDelta> {
    corpus.call(call_id)?;
    let Some(pos) = corpus
        .review_queue()
        .iter()
        .position(|q| q.call_id == call_id && q.status != QueueStatus::Complete)
    else {
        return Err(Error::Conflict(match corpus.queue_item(call_id) {
            Some(_) => format!("review of call {call_id} is already complete"),
            None => format!("call {call_id} is not queued for review"),
        }));
    };
    let mut seen = BTreeSet::new();
    for l in labels {
        if !seen.insert(l.utterance_id.as_str()) {
            return Err(Error::invalid(format!("{} appears twice in the batch", l.utterance_id)));
        }
        let utt = corpus.utterance(&l.utterance_id).map_err(|_| {
            Error::invalid(format!("unknown utterance {} in review of call {call_id}", l.utterance_id))
        })?;
        if utt.call_id != call_id {
            return Err(Error::invalid(format!("{} does not belong to call {call_id}", l.utterance_id)));
        }
    }
    let mut work = corpus.clone();
    let mut delta = PartitionDelta::default();
    for l in labels {
        let d = work
            .apply_label(&l.utterance_id, l.label, LabelSource::LoopHuman)
            .map_err(|e| match e {
                Error::Conflict(m) | Error::Invalid(m) => Error::invalid(m),
                other => other,
            })?;
        delta.merge(d);
    }
    work.queue_mut()[pos].status = QueueStatus::Complete;
    work.set_call_status(call_id, CallStatus::Reviewed)?;
    *corpus = work;
    Ok(delta)
}

/// Applies seed annotations, all or nothing.
pub fn seed_labels<'a>(
    corpus: &mut Corpus,
    labels: impl IntoIterator<Item = (&'a str, SentimentLabel)>,
) -> Result<PartitionDelta> {
    let mut work = corpus.clone();
    let mut delta = PartitionDelta::default();
    for (id, label) in labels {
        delta.merge(work.apply_label(id, label, LabelSource::SeedHuman)?);
    }
    *corpus = work;
    Ok(delta)
}
