use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct SpeakingRateFeatures {
    /// Share of the utterance that is silent.
    pub pause_ratio: f64,
    /// Non-whitespace characters per second.
    pub cps: f64,
    /// Whitespace-delimited words per second.
    pub wps: f64,
}

pub fn speaking_rate(transcript: &str, t_total: f64, t_silence: f64) -> Result<SpeakingRateFeatures> {
    if !(t_total > 0.0) {
        return Err(Error::invalid(format!("total time must be positive, got {t_total}")));
    }
    if !(0.0..=t_total).contains(&t_silence) {
        return Err(Error::invalid(format!(
            "silence time {t_silence} outside [0, {t_total}]"
        )));
    }
    let chars = transcript.chars().filter(|c| !c.is_whitespace()).count();
    let words = transcript.split_whitespace().count();
    Ok(SpeakingRateFeatures {
        pause_ratio: t_silence / t_total,
        cps: chars as f64 / t_total,
        wps: words as f64 / t_total,
    })
}
