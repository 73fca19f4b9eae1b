use serde::{Deserialize, Serialize};

use crate::label::Vote;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QueueStatus {
    Pending,
    InReview,
    Complete,
}

/// An utterance as presented for review, with its machine label.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueuedUtterance {
    pub utterance_id: String,
    pub machine_label: Vote,
}

/// A flagged call waiting for (or under) human review.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReviewQueueItem {
    pub call_id: String,
    pub utterances: Vec<QueuedUtterance>,
    pub enqueued_iteration: u32,
    pub status: QueueStatus,
    /// Call duration in minutes.
    pub duration_min: f64,
    pub customer_neg_fraction: f64,
    pub csr_neg_fraction: f64,
}
