use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::aggregate::{aggregate9, AggStats9};
use super::frame::frame_signal;
use super::spectral::{FrameAnalyzer, PitchConfig};
use super::speaking_rate::{speaking_rate, SpeakingRateFeatures};
use crate::error::{Error, Result};
use crate::ingest::vad::{self, VadConfig};

pub const N_FEATURES: usize = 39;

/// Canonical column order: four frame features, each expanded into its nine
/// statistics, then the three speaking-rate features.
pub const COLUMNS: [&str; N_FEATURES] = [
    "rms_mean",
    "rms_std",
    "rms_q05",
    "rms_q25",
    "rms_q50",
    "rms_q75",
    "rms_q95",
    "rms_range90",
    "rms_iqr",
    "spectral_mean_freq_mean",
    "spectral_mean_freq_std",
    "spectral_mean_freq_q05",
    "spectral_mean_freq_q25",
    "spectral_mean_freq_q50",
    "spectral_mean_freq_q75",
    "spectral_mean_freq_q95",
    "spectral_mean_freq_range90",
    "spectral_mean_freq_iqr",
    "pitch_mean",
    "pitch_std",
    "pitch_q05",
    "pitch_q25",
    "pitch_q50",
    "pitch_q75",
    "pitch_q95",
    "pitch_range90",
    "pitch_iqr",
    "dominant_freq_mean",
    "dominant_freq_std",
    "dominant_freq_q05",
    "dominant_freq_q25",
    "dominant_freq_q50",
    "dominant_freq_q75",
    "dominant_freq_q95",
    "dominant_freq_range90",
    "dominant_freq_iqr",
    "pause_ratio",
    "cps",
    "wps",
];

/// Column offsets of each block.
pub const RMS: usize = 0;
pub const SPECTRAL_MEAN_FREQ: usize = 9;
pub const PITCH: usize = 18;
pub const DOMINANT_FREQ: usize = 27;
pub const SPEAKING_RATE: usize = 36;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct FeatureVector39(pub [f64; N_FEATURES]);

impl TryFrom<Vec<f64>> for FeatureVector39 {
    type Error = String;

    fn try_from(v: Vec<f64>) -> std::result::Result<Self, Self::Error> {
        let n = v.len();
        v.try_into()
            .map(FeatureVector39)
            .map_err(|_| format!("expected {N_FEATURES} features, got {n}"))
    }
}

impl From<FeatureVector39> for Vec<f64> {
    fn from(fv: FeatureVector39) -> Self {
        fv.0.to_vec()
    }
}

impl FeatureVector39 {
    pub fn from_parts(
        rms: AggStats9,
        spectral_mean_freq: AggStats9,
        pitch: AggStats9,
        dominant_freq: AggStats9,
        rate: SpeakingRateFeatures,
    ) -> Self {
        let mut v = [0.0; N_FEATURES];
        v[RMS..RMS + 9].copy_from_slice(&rms.to_array());
        v[SPECTRAL_MEAN_FREQ..SPECTRAL_MEAN_FREQ + 9].copy_from_slice(&spectral_mean_freq.to_array());
        v[PITCH..PITCH + 9].copy_from_slice(&pitch.to_array());
        v[DOMINANT_FREQ..DOMINANT_FREQ + 9].copy_from_slice(&dominant_freq.to_array());
        v[SPEAKING_RATE] = rate.pause_ratio;
        v[SPEAKING_RATE + 1] = rate.cps;
        v[SPEAKING_RATE + 2] = rate.wps;
        FeatureVector39(v)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn get(&self, column: &str) -> Option<f64> {
        COLUMNS.iter().position(|c| *c == column).map(|i| self.0[i])
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|v| v.is_finite())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FeatureConfig {
    pub frame_len: f64,
    pub hop: f64,
    pub pitch: PitchConfig,
    pub min_duration: f64,
    pub max_duration: f64,
}

impl Default for FeatureConfig {
    fn default() -> Self {
        FeatureConfig {
            frame_len: 0.025,
            hop: 0.010,
            pitch: PitchConfig::default(),
            min_duration: 1.0,
            max_duration: 20.0,
        }
    }
}

impl FeatureConfig {
    pub fn frame_samples(&self, sample_rate: u32) -> usize {
        (self.frame_len * sample_rate as f64).round() as usize
    }

    pub fn hop_samples(&self, sample_rate: u32) -> usize {
        ((self.hop * sample_rate as f64).round() as usize).max(1)
    }
}

/// Builds the 39-value vector for one utterance slice. Pitch statistics use
/// voiced frames only and are all zero when no frame is voiced.
pub fn utterance_features(
    samples: &[f64],
    sample_rate: u32,
    transcript: &str,
    silence_time: f64,
    config: &FeatureConfig,
) -> Result<FeatureVector39> {
    let duration = samples.len() as f64 / sample_rate as f64;
    if duration < config.min_duration - 1e-9 || duration > config.max_duration + 1e-9 {
        return Err(Error::invalid(format!(
            "utterance duration {duration:.3}s outside [{}, {}]",
            config.min_duration, config.max_duration
        )));
    }
    let frame_len = config.frame_samples(sample_rate);
    let frames = frame_signal(samples, frame_len, config.hop_samples(sample_rate));
    if frames.len() < 2 {
        return Err(Error::invalid(format!(
            "{} frame(s); at least 2 are needed",
            frames.len()
        )));
    }
    let mut analyzer = FrameAnalyzer::new(sample_rate, frame_len, config.pitch)?;
    let mut rms = Vec::with_capacity(frames.len());
    let mut centroid = Vec::with_capacity(frames.len());
    let mut pitch = Vec::new();
    let mut dominant = Vec::with_capacity(frames.len());
    for frame in frames {
        let f = analyzer.analyze(frame);
        rms.push(f.rms_amplitude);
        centroid.push(f.spectral_mean_freq);
        dominant.push(f.dominant_freq);
        if f.pitch > 0.0 {
            pitch.push(f.pitch);
        }
    }
    let rate = speaking_rate(transcript, duration, silence_time.clamp(0.0, duration))?;
    let stats = |v: &[f64]| aggregate9(v).unwrap_or_default();
    let fv = FeatureVector39::from_parts(
        stats(&rms),
        stats(&centroid),
        stats(&pitch),
        stats(&dominant),
        rate,
    );
    if !fv.is_finite() {
        return Err(Error::invalid("non-finite feature value"));
    }
    Ok(fv)
}

/// [`utterance_features`] with the silence time measured by frame-level VAD
/// inside the slice.
pub fn featurize_utterance(
    samples: &[f64],
    sample_rate: u32,
    transcript: &str,
    config: &FeatureConfig,
    vad_config: &VadConfig,
) -> Result<FeatureVector39> {
    let silence = vad::silence_time(samples, sample_rate, vad_config);
    utterance_features(samples, sample_rate, transcript, silence, config)
}

/// Feature vectors keyed by utterance id.
pub type FeatureTable = BTreeMap<String, FeatureVector39>;

/// Writes a feature table as CSV: `utterance_id` then the 39 canonical
/// columns. Values use the shortest representation that parses back to the
/// same `f64`.
pub fn write_feature_table(path: &Path, table: &FeatureTable) -> Result<()> {
    let mut writer = csv::Writer::from_path(path)?;
    let mut header = vec!["utterance_id"];
    header.extend(COLUMNS);
    writer.write_record(&header)?;
    for (id, fv) in table {
        let mut row = vec![id.clone()];
        row.extend(fv.0.iter().map(|v| v.to_string()));
        writer.write_record(&row)?;
    }
    writer.flush().map_err(|e| Error::io(path, e))
}

pub fn read_feature_table(path: &Path) -> Result<FeatureTable> {
    let mut reader = csv::Reader::from_path(path)?;
    let header = reader.headers()?.clone();
    let expected: Vec<&str> = std::iter::once("utterance_id").chain(COLUMNS).collect();
    if header.iter().collect::<Vec<_>>() != expected {
        return Err(Error::invalid(format!(
            "{}: header does not match the canonical feature columns",
            path.display()
        )));
    }
    let mut table = FeatureTable::new();
    for (n, record) in reader.records().enumerate() {
        let record = record?;
        let id = record[0].to_string();
        let mut v = [0.0; N_FEATURES];
        for (i, slot) in v.iter_mut().enumerate() {
            *slot = record[i + 1].parse().map_err(|_| {
                Error::invalid(format!("{}: row {}: bad value `{}`", path.display(), n + 2, &record[i + 1]))
            })?;
        }
        table.insert(id, FeatureVector39(v));
    }
    Ok(table)
}
