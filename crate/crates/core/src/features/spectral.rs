//! Per-frame loudness and sharpness features.

use std::sync::Arc;

use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use super::frame::hann;
use crate::error::{Error, Result};

pub const MIN_FRAME_LEN: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct FrameFeatures {
    pub rms_amplitude: f64,
    /// Spectral centroid, Hz.
    pub spectral_mean_freq: f64,
    /// Hz; 0 when unvoiced.
    pub pitch: f64,
    pub dominant_freq: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PitchConfig {
    pub min_hz: f64,
    pub max_hz: f64,
    /// Minimum normalized autocorrelation peak for a voiced frame.
    pub voicing_threshold: f64,
}

impl Default for PitchConfig {
    fn default() -> Self {
        PitchConfig {
            min_hz: 60.0,
            max_hz: 400.0,
            voicing_threshold: 0.3,
        }
    }
}

/// Reusable analyzer for frames of one fixed length.
pub struct FrameAnalyzer {
    sample_rate: u32,
    frame_len: usize,
    n_fft: usize,
    window: Vec<f64>,
    fft: Arc<dyn Fft<f64>>,
    pitch: PitchConfig,
    buf: Vec<Complex<f64>>,
}

impl FrameAnalyzer {
    pub fn new(sample_rate: u32, frame_len: usize, pitch: PitchConfig) -> Result<Self> {
        if frame_len < MIN_FRAME_LEN {
            return Err(Error::invalid(format!(
                "frame length {frame_len} is below {MIN_FRAME_LEN} samples"
            )));
        }
        let n_fft = frame_len.next_power_of_two();
        let fft = FftPlanner::new().plan_fft_forward(n_fft);
        Ok(FrameAnalyzer {
            sample_rate,
            frame_len,
            n_fft,
            window: hann(frame_len),
            fft,
            pitch,
            buf: vec![Complex::default(); n_fft],
        })
    }

    pub fn n_fft(&self) -> usize {
        self.n_fft
    }

    pub fn bin_hz(&self) -> f64 {
        self.sample_rate as f64 / self.n_fft as f64
    }

    /// Magnitudes of bins `0..=n_fft/2` of the Hann-windowed, zero-padded frame.
    pub fn magnitudes(&mut self, frame: &[f64]) -> Vec<f64> {
        debug_assert_eq!(frame.len(), self.frame_len);
        for (i, slot) in self.buf.iter_mut().enumerate() {
            *slot = if i < frame.len() {
                Complex::new(frame[i] * self.window[i], 0.0)
            } else {
                Complex::default()
            };
        }
        self.fft.process(&mut self.buf);
        self.buf[..=self.n_fft / 2].iter().map(|c| c.norm()).collect()
    }

    pub fn analyze(&mut self, frame: &[f64]) -> FrameFeatures {
        let rms = (frame.iter().map(|x| x * x).sum::<f64>() / frame.len() as f64).sqrt();
        if rms == 0.0 {
            return FrameFeatures::default();
        }
        let mags = self.magnitudes(frame);
        let bin = self.bin_hz();
        let (mut weighted, mut total) = (0.0, 0.0);
        let (mut peak_bin, mut peak) = (0usize, 0.0);
        for (k, &m) in mags.iter().enumerate().skip(1) {
            weighted += k as f64 * bin * m;
            total += m;
            if m > peak {
                peak = m;
                peak_bin = k;
            }
        }
        let centroid = if total > 0.0 { weighted / total } else { 0.0 };
        FrameFeatures {
            rms_amplitude: rms,
            spectral_mean_freq: centroid,
            pitch: estimate_pitch(frame, self.sample_rate, &self.pitch),
            dominant_freq: peak_bin as f64 * bin,
        }
    }
}

/// Features of a single frame; see [`FrameAnalyzer`] for repeated use.
pub fn frame_features(frame: &[f64], sample_rate: u32) -> Result<FrameFeatures> {
    Ok(FrameAnalyzer::new(sample_rate, frame.len(), PitchConfig::default())?.analyze(frame))
}

/// Autocorrelation of the mean-removed frame at `lag`, normalized by the
/// zero-lag energy. The implicit `(N - lag) / N` taper keeps noise frames
/// from reaching the voicing threshold at long lags.
fn normalized_autocorr(x: &[f64], energy: f64, lag: usize) -> f64 {
    let mut xy = 0.0;
    for i in 0..x.len() - lag {
        xy += x[i] * x[i + lag];
    }
    xy / energy
}

/// Autocorrelation pitch estimate in Hz, 0 for unvoiced frames.
///
/// Picks the shortest lag in the search range whose correlation is a local
/// maximum within 10% of the best one, which avoids locking onto period
/// multiples, then refines it by parabolic interpolation.
pub fn estimate_pitch(frame: &[f64], sample_rate: u32, config: &PitchConfig) -> f64 {
    let sr = sample_rate as f64;
    let mean = frame.iter().sum::<f64>() / frame.len() as f64;
    let x: Vec<f64> = frame.iter().map(|v| v - mean).collect();
    let energy: f64 = x.iter().map(|v| v * v).sum();
    if energy <= 0.0 {
        return 0.0;
    }
    let min_lag = ((sr / config.max_hz).floor() as usize).max(1);
    let max_lag = ((sr / config.min_hz).ceil() as usize).min(x.len().saturating_sub(x.len() / 4));
    if max_lag <= min_lag + 1 {
        return 0.0;
    }
    let r: Vec<f64> = (min_lag - 1..=max_lag + 1)
        .map(|lag| {
            if lag == 0 || lag >= x.len() {
                0.0
            } else {
                normalized_autocorr(&x, energy, lag)
            }
        })
        .collect();
    // r[i] holds lag min_lag - 1 + i
    let best = (1..r.len() - 1).map(|i| r[i]).fold(f64::NEG_INFINITY, f64::max);
    if best < config.voicing_threshold {
        return 0.0;
    }
    let Some(i) = (1..r.len() - 1)
        .find(|&i| r[i] >= r[i - 1] && r[i] >= r[i + 1] && r[i] >= 0.9 * best)
    else {
        return 0.0;
    };
    let denom = r[i - 1] - 2.0 * r[i] + r[i + 1];
    let delta = if denom.abs() > 1e-12 {
        (0.5 * (r[i - 1] - r[i + 1]) / denom).clamp(-0.5, 0.5)
    } else {
        0.0
    };
    let lag = (min_lag - 1 + i) as f64 + delta;
    (sr / lag).clamp(config.min_hz, config.max_hz)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn sine(freq: f64, amp: f64, n: usize, sr: f64) -> Vec<f64> {
        (0..n).map(|i| amp * (2.0 * PI * freq * i as f64 / sr).sin()).collect()
    }

    /// Plain autocorrelation over every lag; the fundamental is the first
    /// local maximum after the first negative lobe.
    fn brute_force_pitch(x: &[f64], sr: f64) -> f64 {
        let n = x.len();
        let r: Vec<f64> = (0..n)
            .map(|lag| (0..n - lag).map(|i| x[i] * x[i + lag]).sum())
            .collect();
        let first_neg = (1..n).find(|&l| r[l] < 0.0).unwrap();
        let lag = (first_neg + 1..n - 1)
            .find(|&l| r[l] >= r[l - 1] && r[l] >= r[l + 1])
            .unwrap();
        sr / lag as f64
    }

    #[test]
    fn sine_rms_and_dominant() {
        let x = sine(200.0, 0.5, 200, 8000.0);
        let f = frame_features(&x, 8000).unwrap();
        assert!((f.rms_amplitude - 0.5 / 2f64.sqrt()).abs() < 1e-3);
        let bin = 8000.0 / 256.0;
        assert!((f.dominant_freq - 200.0).abs() <= bin, "{}", f.dominant_freq);
    }

    #[test]
    fn sine_pitch_matches_brute_force() {
        for freq in [110.0, 150.0, 200.0, 245.0, 310.0] {
            let x = sine(freq, 0.5, 200, 8000.0);
            let f = frame_features(&x, 8000).unwrap();
            let oracle = brute_force_pitch(&x, 8000.0);
            assert!((f.pitch - freq).abs() <= 5.0, "{freq}: {}", f.pitch);
            assert!((f.pitch - oracle).abs() <= 5.0, "{freq}: {} vs {oracle}", f.pitch);
        }
    }

    #[test]
    fn zero_frame_is_all_zero() {
        let f = frame_features(&[0.0; 200], 8000).unwrap();
        assert_eq!(f, FrameFeatures::default());
    }

    #[test]
    fn short_frames_are_rejected() {
        assert!(frame_features(&[0.1; 63], 8000).is_err());
    }

    #[test]
    fn noise_is_unvoiced() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        let x: Vec<f64> = (0..200).map(|_| rng.random::<f64>() - 0.5).collect();
        assert_eq!(frame_features(&x, 8000).unwrap().pitch, 0.0);
    }

    #[test]
    fn gain_scales_rms_only() {
        let x: Vec<f64> = sine(180.0, 0.3, 200, 8000.0)
            .iter()
            .zip(sine(900.0, 0.1, 200, 8000.0))
            .map(|(a, b)| a + b)
            .collect();
        let base = frame_features(&x, 8000).unwrap();
        for g in [0.25, 3.0] {
            let y: Vec<f64> = x.iter().map(|v| v * g).collect();
            let f = frame_features(&y, 8000).unwrap();
            assert!((f.rms_amplitude - g * base.rms_amplitude).abs() < 1e-12);
            assert!((f.spectral_mean_freq - base.spectral_mean_freq).abs() < 1e-9);
            assert_eq!(f.dominant_freq, base.dominant_freq);
            assert!((f.pitch - base.pitch).abs() < 1e-9);
        }
    }
}
