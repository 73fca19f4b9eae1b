//! One pass of the annotation loop, applied all-or-nothing.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{auto_label, flag_call, CallPredictionStats, Committees, PipelineConfig, QueueStatus, QueuedUtterance, ReviewQueueItem};
use crate::corpus::store::write_atomic;
use crate::corpus::{CallStatus, Corpus, CorpusStore};
use crate::error::{Error, Result};
use crate::features::{read_feature_table, FeatureTable};
use crate::label::{LabelSource, Polarity, SentimentLabel, Vote};

/// Checkpoints at which a hook may abort the iteration.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Trained,
    Predicted,
    Queued,
    AutoLabeled,
    Committing,
}

impl Stage {
    pub const ALL: [Stage; 5] = [Stage::Trained, Stage::Predicted, Stage::Queued, Stage::AutoLabeled, Stage::Committing];
}

/// Called at every [`Stage`]; an error aborts with the corpus unchanged.
pub type IterationHook<'a> = &'a mut dyn FnMut(Stage) -> Result<()>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CallReport {
    pub stats: CallPredictionStats,
    pub flagged: bool,
    /// Left alone because an earlier review of this call is still open.
    pub withheld: bool,
    pub auto_accepted: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationReport {
    pub iteration: u32,
    pub active_members: Vec<String>,
    pub text_training_size: usize,
    pub audio_training_size: usize,
    pub predicted: usize,
    pub flagged_calls: Vec<String>,
    pub auto_accepted: usize,
    pub auto_accepted_negative: usize,
    pub labeled_before: usize,
    pub labeled_after: usize,
    pub remaining: usize,
    /// Nothing was flagged and nothing auto-accepted.
    pub quiescent: bool,
    pub calls: Vec<CallReport>,
    /// Accuracy of each member on its own training data.
    pub training_accuracy: BTreeMap<String, f64>,
}

fn seed_count(corpus: &Corpus) -> usize {
    corpus
        .utterances()
        .filter(|u| {
            u.label
                .is_some_and(|l| l.source == LabelSource::SeedHuman && l.value.polarity().is_some())
        })
        .count()
}

fn training_accuracy(committees: &Committees, corpus: &Corpus, features: &FeatureTable) -> BTreeMap<String, f64> {
    let mut hits: BTreeMap<String, (usize, usize)> = BTreeMap::new();
    for (_, text, truth) in corpus.labeled_text_items() {
        for (name, p) in committees.models.text.predict(text) {
            let e = hits.entry(name).or_default();
            e.0 += usize::from(p == truth);
            e.1 += 1;
        }
    }
    let (labeled, _) = super::audio_training_rows(corpus, features);
    for (_, row, truth) in &labeled {
        if let Ok(preds) = committees.models.audio.predict(row) {
            for (name, p) in preds {
                let e = hits.entry(name).or_default();
                e.0 += usize::from(p.label == *truth);
                e.1 += 1;
            }
        }
    }
    hits.into_iter()
        .filter(|(name, (_, n))| *n > 0 && committees.active.contains(name))
        .map(|(name, (h, n))| (name, h as f64 / n as f64))
        .collect()
}

/// Runs one iteration on `corpus`. On any error, including one raised by
/// `hook`, the corpus is left exactly as it was.
pub fn run_iteration(
    corpus: &mut Corpus,
    features: &FeatureTable,
    config: &PipelineConfig,
    hook: IterationHook<'_>,
) -> Result<(IterationReport, Committees)> {
    config.validate()?;
    let seeds = seed_count(corpus);
    if seeds < config.loop_config.min_seed_labels {
        return Err(Error::invalid(format!(
            "the loop needs {} seed labels, found {seeds}",
            config.loop_config.min_seed_labels
        )));
    }
    let mut work = corpus.clone();
    let iteration = work.iteration();
    let labeled_before = work.partition().labeled_len();

    let committees = Committees::train(&work, features, &config.committee)?;
    hook(Stage::Trained)?;

    let targets: Vec<(String, String, String)> = work
        .unlabeled_items()
        .into_iter()
        .map(|u| (u.utterance_id.clone(), u.call_id.clone(), u.transcript.clone()))
        .collect();
    let predictions: Vec<(String, String, BTreeMap<String, Vote>, Option<Polarity>)> = targets
        .into_par_iter()
        .map(|(id, call_id, text)| {
            let votes = committees.votes(&text, features.get(&id));
            let fused = config.fusion.decide(&votes).ok();
            (id, call_id, votes, fused)
        })
        .collect();
    let predicted = predictions.len();
    let mut fused: BTreeMap<String, Option<Polarity>> = BTreeMap::new();
    let mut by_call: BTreeMap<String, Vec<String>> = BTreeMap::new();
    for (id, call_id, votes, label) in predictions {
        work.set_machine_votes(&id, votes)?;
        fused.insert(id.clone(), label);
        by_call.entry(call_id).or_default().push(id);
    }
    hook(Stage::Predicted)?;

    let mut calls = Vec::new();
    let mut flagged_calls = Vec::new();
    let mut sweep: Vec<(usize, Vec<String>)> = Vec::new();
    for (call_id, ids) in &by_call {
        let call = work.call(call_id)?;
        let labels: Vec<_> = work
            .call_utterances(call_id)?
            .into_iter()
            .filter(|u| u.is_speech() && !work.partition().discarded.contains(&u.utterance_id))
            .filter_map(|u| {
                let p = u.polarity().or_else(|| fused.get(&u.utterance_id).copied().flatten())?;
                Some((u.role, p))
            })
            .collect();
        let stats = CallPredictionStats::from_labels(call_id, call.duration, &labels);
        let withheld = work.open_queue_item(call_id).is_some();
        let reviewed_before = work.queue_item(call_id).is_some();
        let flagged = !reviewed_before && flag_call(&stats, &config.loop_config);
        if flagged {
            let item = ReviewQueueItem {
                call_id: call_id.clone(),
                utterances: ids
                    .iter()
                    .map(|id| QueuedUtterance {
                        utterance_id: id.clone(),
                        machine_label: fused[id].map(Vote::from).unwrap_or(Vote::Abstain),
                    })
                    .collect(),
                enqueued_iteration: iteration,
                status: QueueStatus::Pending,
                duration_min: stats.duration,
                customer_neg_fraction: stats.customer_neg_fraction,
                csr_neg_fraction: stats.csr_neg_fraction,
            };
            work.queue_mut().push(item);
            work.set_call_status(call_id, CallStatus::Flagged)?;
            flagged_calls.push(call_id.clone());
        } else if !withheld {
            sweep.push((calls.len(), ids.clone()));
        }
        calls.push(CallReport {
            stats,
            flagged,
            withheld,
            auto_accepted: 0,
        });
    }
    hook(Stage::Queued)?;

    let (mut auto_accepted, mut auto_accepted_negative) = (0, 0);
    for (idx, ids) in sweep {
        for id in ids {
            let utt = work.utterance(&id)?;
            let Some(votes) = utt.machine_votes.as_ref() else { continue };
            if let Some(p) = auto_label(utt, votes, &config.loop_config) {
                work.apply_label(&id, SentimentLabel::from(p), LabelSource::MachineUnanimous)?;
                calls[idx].auto_accepted += 1;
                auto_accepted += 1;
                auto_accepted_negative += usize::from(p.is_negative());
            }
        }
        let call_id = calls[idx].stats.call_id.clone();
        if work.call(&call_id)?.status != CallStatus::Reviewed {
            work.set_call_status(&call_id, CallStatus::Predicted)?;
        }
    }
    hook(Stage::AutoLabeled)?;

    work.set_iteration(iteration + 1);
    work.partition().check()?;
    let report = IterationReport {
        iteration,
        active_members: committees.active.iter().cloned().collect(),
        text_training_size: committees.models.text_training_size,
        audio_training_size: committees.models.audio_training_size,
        predicted,
        quiescent: flagged_calls.is_empty() && auto_accepted == 0,
        flagged_calls,
        auto_accepted,
        auto_accepted_negative,
        labeled_before,
        labeled_after: work.partition().labeled_len(),
        remaining: work.partition().unlabeled.len(),
        calls,
        training_accuracy: training_accuracy(&committees, &work, features),
    };
    *corpus = work;
    Ok((report, committees))
}

/// Loads the stored corpus and feature table, runs one iteration, and
/// commits the result, the fitted models, and the report.
pub fn run_stored_iteration(store: &CorpusStore, config: &PipelineConfig, hook: IterationHook<'_>) -> Result<IterationReport> {
    let mut corpus = store.load()?;
    let features_path = store.features_path();
    if !features_path.exists() {
        return Err(Error::invalid("no feature table yet; run featurize first"));
    }
    let features = read_feature_table(&features_path)?;
    let (report, committees) = run_iteration(&mut corpus, &features, config, hook)?;
    hook(Stage::Committing)?;
    store.commit(&mut corpus)?;
    committees.save(&store.models_dir())?;
    let dir = store.reports_dir();
    std::fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
    write_atomic(
        &dir.join(format!("iteration-{:04}.json", report.iteration)),
        &serde_json::to_vec_pretty(&report)?,
    )?;
    Ok(report)
}
