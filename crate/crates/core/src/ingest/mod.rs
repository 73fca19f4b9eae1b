//! Audio decoding, intro stripping, voice activity detection, transcript
//! alignment, and speaker role assignment.

pub mod roles;
pub mod transcript;
pub mod vad;
pub mod wav;

use serde::{Deserialize, Serialize};

use crate::corpus::{Call, CallStatus, Span, Utterance};
use crate::error::Result;

pub use self::roles::{assign_roles, normalize_text, RoleAssignment, DEFAULT_CUES};
pub use self::transcript::{align_transcript, Alignment, Diagnostic, TranscriptDoc, TranscriptRecord};
pub use self::vad::{detect_voice_segments, strip_intro, VadConfig};
pub use self::wav::{read_wav, write_wav, Audio};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SegmentConfig {
    pub vad: VadConfig,
    pub role_cues: Vec<String>,
}

impl Default for SegmentConfig {
    fn default() -> Self {
        SegmentConfig {
            vad: VadConfig::default(),
            role_cues: DEFAULT_CUES.iter().map(|s| s.to_string()).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SegmentedCall {
    pub call: Call,
    pub utterances: Vec<Utterance>,
    /// Voiced segments on the original timeline, after intro removal.
    pub segments: Vec<Span>,
    /// Seconds cut from the start as robot introduction.
    pub intro_end: f64,
    pub rejected: Vec<Diagnostic>,
}

/// Runs intro stripping, VAD, alignment, and role assignment for one call.
/// All times stay on the original recording's timeline.
pub fn segment_call(
    audio: &Audio,
    audio_path: &str,
    transcript: &TranscriptDoc,
    config: &SegmentConfig,
) -> Result<SegmentedCall> {
    config.vad.validate()?;
    let sr = audio.sample_rate;
    let offset = vad::intro_end(&audio.samples, sr, &config.vad);
    let offset_s = offset as f64 / sr as f64;
    let segments: Vec<Span> =
        detect_voice_segments(&audio.samples[offset..], sr, &config.vad)
            .into_iter()
            .map(|s| Span::new(s.start + offset_s, s.end + offset_s))
            .collect();

    let duration = audio.duration();
    let Alignment {
        mut utterances,
        rejected,
    } = align_transcript(
        transcript,
        &transcript.call_id,
        duration,
        &segments,
        config.vad.max_pause,
    )?;
    for d in &rejected {
        log::warn!(
            "call {}: transcript record {} rejected: {}",
            transcript.call_id,
            d.record,
            d.reason
        );
    }
    let roles = assign_roles(&mut utterances, &config.role_cues);

    let call = Call {
        call_id: transcript.call_id.clone(),
        audio_path: audio_path.to_string(),
        sample_rate: sr,
        duration,
        utterances: utterances.iter().map(|u| u.utterance_id.clone()).collect(),
        status: CallStatus::Segmented,
        role_low_confidence: roles.low_confidence,
    };
    Ok(SegmentedCall {
        call,
        utterances,
        segments,
        intro_end: offset_s,
        rejected,
    })
}
