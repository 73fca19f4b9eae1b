//! Corpus-level operations behind the command-line verbs.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::log::read_label_log;
use crate::corpus::store::write_atomic;
use crate::corpus::{CorpusStore, Utterance};
use crate::error::{Error, Result};
use crate::evaluation::{compare_committees, ComparisonReport, EvalRecord, ReportRow};
use crate::features::{featurize_utterance, mfcc, write_feature_table, FeatureConfig, FeatureTable, MfccConfig, MfccMatrix};
use crate::fusion::FusionConfig;
use crate::ingest::{read_wav, segment_call, Audio, SegmentConfig, TranscriptDoc, VadConfig};
use crate::label::{Polarity, SentimentLabel};
use crate::pipeline::{seed_labels, CommitteeConfig, CommitteeModels, Committees};
use crate::scoring::{profile_corpus_call, CallSentimentProfile, ScoringConfig};

const AUDIO_DIR: &str = "audio";
const TRANSCRIPT_DIR: &str = "transcripts";
const MFCC_DIR: &str = "mfcc";

fn list(dir: &Path, ext: &str) -> Result<Vec<PathBuf>> {
    if !dir.exists() {
        return Ok(Vec::new());
    }
    let mut out = Vec::new();
    for entry in fs::read_dir(dir).map_err(|e| Error::io(dir, e))? {
        let path = entry.map_err(|e| Error::io(dir, e))?.path();
        if path.extension().is_some_and(|e| e == ext) {
            out.push(path);
        }
    }
    out.sort();
    Ok(out)
}

fn stem(path: &Path) -> String {
    path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default()
}

fn copy(from: &Path, to: &Path) -> Result<()> {
    fs::copy(from, to).map(|_| ()).map_err(|e| Error::io(from, e))
}

/// Copies `audio/<id>.wav` and `transcripts/<id>.json` pairs from `src`
/// into the corpus. Returns the ids copied; pairs already present are
/// skipped.
pub fn ingest_dir(store: &CorpusStore, src: &Path) -> Result<Vec<String>> {
    let (audio_dir, transcript_dir) = (store.root().join(AUDIO_DIR), store.root().join(TRANSCRIPT_DIR));
    for dir in [&audio_dir, &transcript_dir] {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    let mut copied = Vec::new();
    for wav in list(&src.join(AUDIO_DIR), "wav")? {
        let id = stem(&wav);
        let transcript = src.join(TRANSCRIPT_DIR).join(format!("{id}.json"));
        if !transcript.exists() {
            log::warn!("{}: no transcript, skipped", wav.display());
            continue;
        }
        let (wav_to, json_to) = (audio_dir.join(format!("{id}.wav")), transcript_dir.join(format!("{id}.json")));
        if wav_to.exists() && json_to.exists() {
            continue;
        }
        copy(&wav, &wav_to)?;
        copy(&transcript, &json_to)?;
        copied.push(id);
    }
    if copied.is_empty() && list(&src.join(AUDIO_DIR), "wav")?.is_empty() {
        return Err(Error::invalid(format!("{}: no audio/*.wav files", src.display())));
    }
    Ok(copied)
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SegmentReport {
    pub calls: usize,
    pub utterances: usize,
    pub non_speech: usize,
    pub rejected_records: usize,
    pub low_confidence_roles: Vec<String>,
}

/// Segments every ingested call that is not yet in the corpus.
pub fn segment_ingested(store: &CorpusStore, config: &SegmentConfig) -> Result<SegmentReport> {
    let mut corpus = store.load()?;
    let known: BTreeSet<String> = corpus.calls().map(|c| c.call_id.clone()).collect();
    let pending: Vec<PathBuf> = list(&store.root().join(TRANSCRIPT_DIR), "json")?
        .into_iter()
        .filter(|p| !known.contains(&stem(p)))
        .collect();
    let segmented = pending
        .par_iter()
        .map(|path| {
            let doc = TranscriptDoc::read(path)?;
            let rel = format!("{AUDIO_DIR}/{}.wav", stem(path));
            let audio = read_wav(&store.root().join(&rel))?;
            segment_call(&audio, &rel, &doc, config)
        })
        .collect::<Result<Vec<_>>>()?;
    let mut report = SegmentReport::default();
    for seg in segmented {
        report.calls += 1;
        report.utterances += seg.utterances.len();
        report.non_speech += seg.utterances.iter().filter(|u| !u.is_speech()).count();
        report.rejected_records += seg.rejected.len();
        if seg.call.role_low_confidence {
            report.low_confidence_roles.push(seg.call.call_id.clone());
        }
        corpus.store_call(seg.call, seg.utterances)?;
    }
    store.commit(&mut corpus)?;
    Ok(report)
}

/// Feature vectors for the speech utterances of one call. Utterances whose
/// slice cannot be featurized (too short or too long) are left out.
pub fn featurize_call<'a>(
    audio: &Audio,
    utterances: impl IntoIterator<Item = &'a Utterance>,
    config: &FeatureConfig,
    vad: &VadConfig,
) -> Vec<(String, Result<crate::features::FeatureVector39>)> {
    utterances
        .into_iter()
        .filter(|u| u.is_speech())
        .map(|u| {
            let fv = featurize_utterance(audio.slice(u.audio_span()), audio.sample_rate, &u.transcript, config, vad);
            (u.utterance_id.clone(), fv)
        })
        .collect()
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct FeaturizeReport {
    pub featurized: usize,
    pub skipped: usize,
    pub mfcc_calls: usize,
}

/// MFCC matrices of one call's speech utterances.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CallMfcc {
    pub call_id: String,
    pub utterances: BTreeMap<String, MfccMatrix>,
}

/// Writes `features.csv` for every speech utterance in the corpus and,
/// when `mfcc_config` is given, `mfcc/<call_id>.json` per call.
pub fn featurize_corpus(
    store: &CorpusStore,
    config: &FeatureConfig,
    vad: &VadConfig,
    mfcc_config: Option<&MfccConfig>,
) -> Result<FeaturizeReport> {
    let corpus = store.load()?;
    let calls: Vec<_> = corpus.calls().collect();
    if mfcc_config.is_some() {
        let dir = store.root().join(MFCC_DIR);
        fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
    }
    let per_call = calls
        .par_iter()
        .map(|call| -> Result<(Vec<(String, Result<_>)>, bool)> {
            let audio = read_wav(&store.audio_path(call))?;
            let utts = corpus.call_utterances(&call.call_id)?;
            let rows = featurize_call(&audio, utts.iter().copied(), config, vad);
            if let Some(mc) = mfcc_config {
                let doc = CallMfcc {
                    call_id: call.call_id.clone(),
                    utterances: utts
                        .iter()
                        .filter(|u| u.is_speech())
                        .map(|u| (u.utterance_id.clone(), mfcc(audio.slice(u.audio_span()), audio.sample_rate, mc)))
                        .collect(),
                };
                let path = store.root().join(MFCC_DIR).join(format!("{}.json", call.call_id));
                write_atomic(&path, &serde_json::to_vec(&doc)?)?;
            }
            Ok((rows, mfcc_config.is_some()))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut table = FeatureTable::new();
    let mut report = FeaturizeReport::default();
    for (rows, wrote_mfcc) in per_call {
        report.mfcc_calls += usize::from(wrote_mfcc);
        for (id, fv) in rows {
            match fv {
                Ok(fv) => {
                    table.insert(id, fv);
                    report.featurized += 1;
                }
                Err(e) => {
                    log::debug!("{id}: no features: {e}");
                    report.skipped += 1;
                }
            }
        }
    }
    write_feature_table(&store.features_path(), &table)?;
    Ok(report)
}

/// Reads a label log into one label per utterance; later events win.
pub fn read_truth(path: &Path) -> Result<BTreeMap<String, SentimentLabel>> {
    Ok(read_label_log(path)?
        .into_iter()
        .map(|e| (e.utterance_id, e.label))
        .collect())
}

/// Seeds the corpus from a truth log, call by call in id order, until at
/// least `min_labels` utterances are labeled. Only calls in `calls` are
/// used when given. Returns the number of labels applied.
pub fn seed_from_truth(
    store: &CorpusStore,
    truth: &BTreeMap<String, SentimentLabel>,
    calls: Option<&BTreeSet<String>>,
    min_labels: usize,
) -> Result<usize> {
    let mut corpus = store.load()?;
    let mut batch: Vec<(String, SentimentLabel)> = Vec::new();
    let call_ids: Vec<String> = corpus
        .calls()
        .map(|c| c.call_id.clone())
        .filter(|id| calls.is_none_or(|set| set.contains(id)))
        .collect();
    for call_id in call_ids {
        if batch.len() >= min_labels {
            break;
        }
        for u in corpus.call_utterances(&call_id)? {
            if !u.is_speech() || corpus.partition().is_labeled(&u.utterance_id) {
                continue;
            }
            if let Some(label) = truth.get(&u.utterance_id).filter(|l| l.polarity().is_some()) {
                batch.push((u.utterance_id.clone(), *label));
            }
        }
    }
    if batch.len() < min_labels {
        return Err(Error::invalid(format!(
            "only {} truth labels available, {min_labels} requested",
            batch.len()
        )));
    }
    seed_labels(&mut corpus, batch.iter().map(|(id, l)| (id.as_str(), *l)))?;
    store.commit(&mut corpus)?;
    Ok(batch.len())
}

/// Committee votes for every speech utterance of `calls` that has a truth
/// label, from models trained on the corpus's current labels.
pub fn evaluation_records(
    store: &CorpusStore,
    committees: &Committees,
    features: &FeatureTable,
    truth: &BTreeMap<String, SentimentLabel>,
    calls: &BTreeSet<String>,
) -> Result<Vec<EvalRecord>> {
    let corpus = store.load()?;
    let mut items = Vec::new();
    for call_id in calls {
        for u in corpus.call_utterances(call_id)? {
            if let Some(p) = u.is_speech().then(|| truth.get(&u.utterance_id).and_then(|l| l.polarity())).flatten() {
                items.push((u.utterance_id.clone(), u.transcript.clone(), p));
            }
        }
    }
    Ok(items
        .into_par_iter()
        .map(|(id, text, truth)| {
            let votes = committees.votes(&text, features.get(&id));
            EvalRecord { id, truth, votes }
        })
        .collect())
}

/// Compares every member and fusion strategy on the held-out calls.
pub fn evaluate_store(
    store: &CorpusStore,
    committee: &CommitteeConfig,
    fusion: &FusionConfig,
    truth: &BTreeMap<String, SentimentLabel>,
    calls: &BTreeSet<String>,
) -> Result<ComparisonReport> {
    let features = crate::features::read_feature_table(&store.features_path())?;
    let committees = if store.models_dir().join(CommitteeModels::FILE).exists() {
        Committees::load(&store.models_dir(), committee)?
    } else {
        Committees::train(&store.load()?, &features, committee)?
    };
    let records = evaluation_records(store, &committees, &features, truth, calls)?;
    if records.is_empty() {
        return Err(Error::invalid("no labeled utterances in the evaluation calls"));
    }
    Ok(compare_committees(&records, fusion, &ReportRow::all(fusion)))
}

/// Fused label of every utterance that has stored machine votes.
pub fn stored_predictions(store: &CorpusStore, fusion: &FusionConfig) -> Result<BTreeMap<String, Polarity>> {
    let corpus = store.load()?;
    Ok(corpus
        .utterances()
        .filter_map(|u| {
            let votes = u.machine_votes.as_ref()?;
            Some((u.utterance_id.clone(), fusion.decide(votes).ok()?))
        })
        .collect())
}

/// Profiles every call that has at least one labeled or predicted
/// utterance.
pub fn score_store(
    store: &CorpusStore,
    fusion: &FusionConfig,
    config: &ScoringConfig,
) -> Result<Vec<CallSentimentProfile>> {
    let corpus = store.load()?;
    let predictions = stored_predictions(store, fusion)?;
    let mut out = Vec::new();
    for call in corpus.calls() {
        match profile_corpus_call(&corpus, &call.call_id, &predictions, config) {
            Ok(p) => out.push(p),
            Err(Error::Invalid(m)) => log::debug!("{}: {m}", call.call_id),
            Err(e) => return Err(e),
        }
    }
    Ok(out)
}
