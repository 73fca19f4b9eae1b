use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::corpus::{utterance_id, Role, Span, Utterance};
use crate::error::{Error, Result};

/// External ASR/diarization output for one call.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TranscriptDoc {
    pub call_id: String,
    pub utterances: Vec<TranscriptRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TranscriptRecord {
    pub start_s: f64,
    pub end_s: f64,
    pub speaker_id: String,
    pub text: String,
}

impl TranscriptDoc {
    pub fn read(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_slice(&bytes)
            .map_err(|e| Error::invalid(format!("{}: {e}", path.display())))
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, serde_json::to_vec_pretty(self)?).map_err(|e| Error::io(path, e))
    }
}

/// A transcript record that could not be turned into an utterance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Diagnostic {
    pub record: usize,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Alignment {
    pub utterances: Vec<Utterance>,
    pub rejected: Vec<Diagnostic>,
}

/// Joins transcript records to voiced segments.
///
/// A record's audio slice is its intersection with the voiced segments. When
/// that intersection has several pieces separated by more than `max_pause`,
/// only the cluster with the most voiced time is kept so no slice spans a
/// long pause. Records with no voiced overlap, or with empty text, become
/// non-speech utterances. Records outside the call or with `end <= start`
/// are rejected.
pub fn align_transcript(
    doc: &TranscriptDoc,
    call_id: &str,
    call_duration: f64,
    segments: &[Span],
    max_pause: f64,
) -> Result<Alignment> {
    if doc.call_id != call_id {
        return Err(Error::invalid(format!(
            "transcript is for call {}, not {call_id}",
            doc.call_id
        )));
    }
    let mut utterances: Vec<Utterance> = Vec::new();
    let mut rejected = Vec::new();
    let mut last_start = f64::NEG_INFINITY;
    for (i, rec) in doc.utterances.iter().enumerate() {
        let reject = |reason: String| Diagnostic { record: i, reason };
        if !(rec.start_s.is_finite() && rec.end_s.is_finite()) {
            rejected.push(reject("non-finite time".into()));
            continue;
        }
        if rec.start_s < 0.0 || rec.end_s > call_duration + 1e-9 {
            rejected.push(reject(format!(
                "time span ({}, {}) outside call duration {call_duration}",
                rec.start_s, rec.end_s
            )));
            continue;
        }
        if rec.end_s <= rec.start_s {
            rejected.push(reject(format!(
                "end {} does not exceed start {}",
                rec.end_s, rec.start_s
            )));
            continue;
        }
        if rec.start_s < last_start {
            rejected.push(reject("start times are not monotone".into()));
            continue;
        }
        let id = utterance_id(call_id, rec.start_s, rec.end_s);
        if utterances.iter().any(|u| u.utterance_id == id) {
            rejected.push(reject("duplicate record".into()));
            continue;
        }
        last_start = rec.start_s;

        let span = Span::new(rec.start_s, rec.end_s);
        let slice = if rec.text.trim().is_empty() {
            None
        } else {
            voiced_slice(span, segments, max_pause)
        };
        utterances.push(Utterance {
            utterance_id: id,
            call_id: call_id.to_string(),
            start: rec.start_s,
            end: rec.end_s,
            speaker_id: rec.speaker_id.clone(),
            role: Role::Unknown,
            transcript: rec.text.clone(),
            slice,
            label: None,
            machine_votes: None,
        });
    }
    Ok(Alignment {
        utterances,
        rejected,
    })
}

fn voiced_slice(span: Span, segments: &[Span], max_pause: f64) -> Option<Span> {
    let pieces: Vec<Span> = segments.iter().filter_map(|s| s.intersect(&span)).collect();
    let mut best: Option<(f64, Span)> = None;
    let mut cluster: Option<(f64, Span)> = None;
    for piece in pieces {
        cluster = match cluster {
            Some((voiced, hull)) if piece.start - hull.end <= max_pause => {
                Some((voiced + piece.duration(), Span::new(hull.start, piece.end)))
            }
            Some(done) => {
                best = pick(best, done);
                Some((piece.duration(), piece))
            }
            None => Some((piece.duration(), piece)),
        };
    }
    if let Some(done) = cluster {
        best = pick(best, done);
    }
    best.map(|(_, s)| s)
}

fn pick(best: Option<(f64, Span)>, candidate: (f64, Span)) -> Option<(f64, Span)> {
    match best {
        Some(b) if b.0 >= candidate.0 => Some(b),
        _ => Some(candidate),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn doc(records: &[(f64, f64, &str, &str)]) -> TranscriptDoc {
        TranscriptDoc {
            call_id: "c1".into(),
            utterances: records
                .iter()
                .map(|&(s, e, spk, text)| TranscriptRecord {
                    start_s: s,
                    end_s: e,
                    speaker_id: spk.into(),
                    text: text.into(),
                })
                .collect(),
        }
    }

    #[test]
    fn contained_record_keeps_its_bounds() {
        let a = align_transcript(
            &doc(&[(1.0, 3.0, "spkA", "hello")]),
            "c1",
            10.0,
            &[Span::new(0.5, 3.5)],
            5.0,
        )
        .unwrap();
        assert_eq!(a.utterances[0].slice, Some(Span::new(1.0, 3.0)));
        assert!(a.rejected.is_empty());
    }

    #[test]
    fn record_inside_a_pause_is_non_speech() {
        let a = align_transcript(
            &doc(&[(4.0, 6.0, "spkA", "hmm")]),
            "c1",
            20.0,
            &[Span::new(0.0, 3.0), Span::new(9.0, 12.0)],
            5.0,
        )
        .unwrap();
        assert!(!a.utterances[0].is_speech());
    }

    #[test]
    fn negative_time_is_rejected() {
        let a = align_transcript(&doc(&[(-1.0, 2.0, "a", "x")]), "c1", 10.0, &[], 5.0).unwrap();
        assert!(a.utterances.is_empty());
        assert_eq!(a.rejected.len(), 1);
        assert!(a.rejected[0].reason.contains("outside"));
    }

    #[test]
    fn wrong_call_is_an_error() {
        assert!(align_transcript(&doc(&[]), "other", 10.0, &[], 5.0).is_err());
    }

    #[test]
    fn slice_never_spans_a_long_pause() {
        // Record covers two voiced pieces 6 s apart; keep the longer one.
        let a = align_transcript(
            &doc(&[(0.0, 12.0, "a", "long record")]),
            "c1",
            12.0,
            &[Span::new(0.5, 2.0), Span::new(8.0, 11.5)],
            5.0,
        )
        .unwrap();
        assert_eq!(a.utterances[0].slice, Some(Span::new(8.0, 11.5)));
    }

    #[test]
    fn short_gaps_are_bridged() {
        let a = align_transcript(
            &doc(&[(0.0, 6.0, "a", "two parts")]),
            "c1",
            6.0,
            &[Span::new(0.5, 2.0), Span::new(3.0, 5.5)],
            5.0,
        )
        .unwrap();
        assert_eq!(a.utterances[0].slice, Some(Span::new(0.5, 5.5)));
    }
}
