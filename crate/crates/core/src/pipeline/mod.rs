//! The semi-supervised annotation loop: train committees on the labeled
//! set, predict the unlabeled set, route informative calls to human review
//! and accept unanimous machine labels.

pub mod committee;
pub mod iteration;
pub mod queue;
pub mod review;
#[cfg(test)]
pub(crate) mod testkit;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

pub use self::committee::{
    audio_training_rows, CommitteeConfig, CommitteeModels, Committees, ExternalMember, LinearMember, ScheduleEntry,
    TextCommittee,
};
pub use self::iteration::{run_iteration, run_stored_iteration, CallReport, IterationHook, IterationReport, Stage};
pub use self::queue::{QueueStatus, QueuedUtterance, ReviewQueueItem};
pub use self::review::{ingest_review, seed_labels, ReviewLabel};

use crate::corpus::{Role, Utterance};
use crate::error::{Error, Result};
use crate::fusion::FusionConfig;
use crate::label::{Polarity, Vote};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LoopConfig {
    /// Minutes.
    pub flag_min_duration: f64,
    pub flag_customer_neg_pct: f64,
    pub flag_csr_neg_pct: f64,
    /// Seconds.
    pub auto_min_dur: f64,
    pub auto_max_dur: f64,
    /// Human seed labels required before the first iteration.
    pub min_seed_labels: usize,
}

impl Default for LoopConfig {
    fn default() -> Self {
        LoopConfig {
            flag_min_duration: 10.0,
            flag_customer_neg_pct: 0.40,
            flag_csr_neg_pct: 0.20,
            auto_min_dur: 1.0,
            auto_max_dur: 20.0,
            min_seed_labels: 200,
        }
    }
}

impl LoopConfig {
    pub fn validate(&self) -> Result<()> {
        let frac = |v: f64| v > 0.0 && v < 1.0;
        if !frac(self.flag_customer_neg_pct) || !frac(self.flag_csr_neg_pct) {
            return Err(Error::invalid("flag fractions must lie strictly between 0 and 1"));
        }
        if !(self.flag_min_duration > 0.0 && self.auto_min_dur > 0.0 && self.auto_max_dur > self.auto_min_dur) {
            return Err(Error::invalid("durations must be positive with auto_min_dur < auto_max_dur"));
        }
        Ok(())
    }
}

/// Everything one iteration needs besides the corpus and features.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineConfig {
    #[serde(rename = "loop")]
    pub loop_config: LoopConfig,
    pub committee: CommitteeConfig,
    pub fusion: FusionConfig,
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<()> {
        self.loop_config.validate()?;
        self.committee.validate()?;
        self.fusion.validate()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CallPredictionStats {
    pub call_id: String,
    /// Minutes.
    pub duration: f64,
    pub customer_utterances: usize,
    pub csr_utterances: usize,
    pub customer_neg_fraction: f64,
    pub csr_neg_fraction: f64,
}

impl CallPredictionStats {
    /// Stats over `(role, polarity)` pairs of one call.
    pub fn from_labels(call_id: &str, duration_s: f64, labels: &[(Role, Polarity)]) -> Self {
        let count = |role: Role| {
            let all = labels.iter().filter(|(r, _)| *r == role).count();
            let neg = labels.iter().filter(|(r, p)| *r == role && p.is_negative()).count();
            let frac = if all == 0 { 0.0 } else { neg as f64 / all as f64 };
            (all, frac)
        };
        let (customer_utterances, customer_neg_fraction) = count(Role::Customer);
        let (csr_utterances, csr_neg_fraction) = count(Role::Csr);
        CallPredictionStats {
            call_id: call_id.to_string(),
            duration: duration_s / 60.0,
            customer_utterances,
            csr_utterances,
            customer_neg_fraction,
            csr_neg_fraction,
        }
    }
}

/// Long calls with a high share of negative customer or CSR utterances go
/// to human review. All comparisons are strict.
pub fn flag_call(stats: &CallPredictionStats, config: &LoopConfig) -> bool {
    stats.duration > config.flag_min_duration
        && (stats.customer_neg_fraction > config.flag_customer_neg_pct
            || stats.csr_neg_fraction > config.flag_csr_neg_pct)
}

/// The shared label when every vote agrees, no member abstained, and the
/// utterance length lies in the configured bounds.
pub fn auto_label(utterance: &Utterance, votes: &BTreeMap<String, Vote>, config: &LoopConfig) -> Option<Polarity> {
    let d = utterance.end - utterance.start;
    if !(config.auto_min_dur..=config.auto_max_dur).contains(&d) {
        return None;
    }
    let mut it = votes.values();
    let first = it.next()?.polarity()?;
    it.all(|v| v.polarity() == Some(first)).then_some(first)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::tests::utt;

    fn stats(duration: f64, customer: f64, csr: f64) -> CallPredictionStats {
        CallPredictionStats {
            call_id: "c".into(),
            duration,
            customer_utterances: 10,
            csr_utterances: 10,
            customer_neg_fraction: customer,
            csr_neg_fraction: csr,
        }
    }

    #[test]
    fn flag_examples() {
        let cfg = LoopConfig::default();
        assert!(flag_call(&stats(12.0, 0.45, 0.05), &cfg));
        assert!(!flag_call(&stats(8.0, 0.60, 0.0), &cfg));
        assert!(flag_call(&stats(11.0, 0.30, 0.25), &cfg));
        assert!(!flag_call(&stats(10.0, 0.9, 0.9), &cfg));
        assert!(!flag_call(&stats(11.0, 0.40, 0.20), &cfg));
    }

    fn votes(neg: usize, non: usize, abstain: usize) -> BTreeMap<String, Vote> {
        (0..neg)
            .map(|_| Vote::Negative)
            .chain((0..non).map(|_| Vote::Nonnegative))
            .chain((0..abstain).map(|_| Vote::Abstain))
            .enumerate()
            .map(|(i, v)| (format!("m{i}"), v))
            .collect()
    }

    #[test]
    fn auto_label_examples() {
        let cfg = LoopConfig::default();
        let u = utt("c", 10.0, 13.0, "a", "x");
        assert_eq!(auto_label(&u, &votes(7, 0, 0), &cfg), Some(Polarity::Negative));
        assert_eq!(auto_label(&u, &votes(6, 1, 0), &cfg), None);
        assert_eq!(auto_label(&u, &votes(6, 0, 1), &cfg), None);
        assert_eq!(auto_label(&u, &votes(0, 0, 0), &cfg), None);
        let short = utt("c", 10.0, 10.8, "a", "x");
        assert_eq!(auto_label(&short, &votes(7, 0, 0), &cfg), None);
        let edge = utt("c", 0.0, 20.0, "a", "x");
        assert_eq!(auto_label(&edge, &votes(0, 7, 0), &cfg), Some(Polarity::Nonnegative));
    }

    #[test]
    fn stats_fractions() {
        let s = CallPredictionStats::from_labels(
            "c",
            660.0,
            &[
                (Role::Customer, Polarity::Negative),
                (Role::Customer, Polarity::Nonnegative),
                (Role::Csr, Polarity::Nonnegative),
                (Role::Unknown, Polarity::Negative),
            ],
        );
        assert_eq!((s.duration, s.customer_neg_fraction, s.csr_neg_fraction), (11.0, 0.5, 0.0));
        assert!(flag_call(&s, &LoopConfig::default()));
    }
}
