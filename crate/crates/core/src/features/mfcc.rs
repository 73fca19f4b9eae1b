//! Mel-frequency cepstral coefficients.

use std::f64::consts::PI;

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use super::frame::{frame_signal, hann};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MfccConfig {
    pub n_coeffs: usize,
    pub n_mels: usize,
    pub frame_len: f64,
    pub hop: f64,
    /// Log mel energies are floored here, dB.
    pub floor_db: f64,
    pub min_fft: usize,
}

impl Default for MfccConfig {
    fn default() -> Self {
        MfccConfig {
            n_coeffs: 13,
            n_mels: 26,
            frame_len: 0.025,
            hop: 0.010,
            floor_db: -80.0,
            min_fft: 512,
        }
    }
}

/// Frames × coefficients.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MfccMatrix {
    pub n_coeffs: usize,
    pub frames: Vec<Vec<f64>>,
}

pub fn hz_to_mel(hz: f64) -> f64 {
    2595.0 * (1.0 + hz / 700.0).log10()
}

pub fn mel_to_hz(mel: f64) -> f64 {
    700.0 * (10f64.powf(mel / 2595.0) - 1.0)
}

/// Triangular mel filters over bins `0..=n_fft/2`, each row scaled to sum 1.
pub fn mel_filterbank(n_mels: usize, n_fft: usize, sample_rate: u32) -> Vec<Vec<f64>> {
    let n_bins = n_fft / 2 + 1;
    let nyquist = sample_rate as f64 / 2.0;
    let mel_max = hz_to_mel(nyquist);
    let edges: Vec<f64> = (0..n_mels + 2)
        .map(|i| mel_to_hz(mel_max * i as f64 / (n_mels + 1) as f64))
        .collect();
    let bin_hz = sample_rate as f64 / n_fft as f64;
    (0..n_mels)
        .map(|m| {
            let (lo, center, hi) = (edges[m], edges[m + 1], edges[m + 2]);
            let mut row: Vec<f64> = (0..n_bins)
                .map(|k| {
                    let f = k as f64 * bin_hz;
                    let up = (f - lo) / (center - lo);
                    let down = (hi - f) / (hi - center);
                    up.min(down).max(0.0)
                })
                .collect();
            let sum: f64 = row.iter().sum();
            if sum > 0.0 {
                row.iter_mut().for_each(|w| *w /= sum);
            }
            row
        })
        .collect()
}

/// Orthonormal DCT-II.
pub fn dct_ortho(x: &[f64]) -> Vec<f64> {
    let n = x.len();
    let nf = n as f64;
    (0..n)
        .map(|k| {
            let scale = if k == 0 { (1.0 / nf).sqrt() } else { (2.0 / nf).sqrt() };
            scale
                * x.iter()
                    .enumerate()
                    .map(|(i, v)| v * (PI * k as f64 * (2 * i + 1) as f64 / (2.0 * nf)).cos())
                    .sum::<f64>()
        })
        .collect()
}

/// Inverse of [`dct_ortho`] (orthonormal DCT-III).
pub fn idct_ortho(c: &[f64]) -> Vec<f64> {
    let n = c.len();
    let nf = n as f64;
    (0..n)
        .map(|i| {
            c.iter()
                .enumerate()
                .map(|(k, v)| {
                    let scale = if k == 0 { (1.0 / nf).sqrt() } else { (2.0 / nf).sqrt() };
                    scale * v * (PI * k as f64 * (2 * i + 1) as f64 / (2.0 * nf)).cos()
                })
                .sum()
        })
        .collect()
}

/// MFCCs on the same framing as [`frame_signal`].
pub fn mfcc(samples: &[f64], sample_rate: u32, config: &MfccConfig) -> MfccMatrix {
    let frame_len = (config.frame_len * sample_rate as f64).round() as usize;
    let hop = ((config.hop * sample_rate as f64).round() as usize).max(1);
    let n_fft = frame_len.next_power_of_two().max(config.min_fft);
    let fb = mel_filterbank(config.n_mels, n_fft, sample_rate);
    let window = hann(frame_len);
    let fft = FftPlanner::new().plan_fft_forward(n_fft);
    let mut buf = vec![Complex::default(); n_fft];

    let frames = frame_signal(samples, frame_len, hop)
        .into_iter()
        .map(|frame| {
            buf.iter_mut().for_each(|c| *c = Complex::default());
            for (i, v) in frame.iter().enumerate() {
                buf[i] = Complex::new(v * window[i], 0.0);
            }
            fft.process(&mut buf);
            let power: Vec<f64> = buf[..=n_fft / 2]
                .iter()
                .map(|c| c.norm_sqr() / n_fft as f64)
                .collect();
            let log_mel: Vec<f64> = fb
                .iter()
                .map(|row| {
                    let e: f64 = row.iter().zip(&power).map(|(w, p)| w * p).sum();
                    if e > 0.0 {
                        (10.0 * e.log10()).max(config.floor_db)
                    } else {
                        config.floor_db
                    }
                })
                .collect();
            let mut c = dct_ortho(&log_mel);
            c.truncate(config.n_coeffs);
            c
        })
        .collect();
    MfccMatrix {
        n_coeffs: config.n_coeffs,
        frames,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::frame::frame_count;
    use rand::{Rng, SeedableRng};

    #[test]
    fn filterbank_rows_sum_to_one() {
        for (n_fft, sr) in [(512, 8000), (1024, 16000), (256, 8000)] {
            for row in mel_filterbank(26, n_fft, sr) {
                let s: f64 = row.iter().sum();
                assert!((0.99..=1.01).contains(&s), "{n_fft}/{sr}: {s}");
            }
        }
    }

    #[test]
    fn dct_round_trip() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
        let x: Vec<f64> = (0..26).map(|_| rng.random::<f64>() * 100.0 - 80.0).collect();
        let back = idct_ortho(&dct_ortho(&x));
        for (a, b) in x.iter().zip(&back) {
            assert!((a - b).abs() < 1e-6);
        }
    }

    #[test]
    fn zero_signal_gives_equal_finite_frames() {
        let m = mfcc(&vec![0.0; 8000], 8000, &MfccConfig::default());
        assert_eq!(m.frames.len(), frame_count(8000, 200, 80).unwrap());
        assert!(m.frames.iter().all(|f| f.len() == 13 && f.iter().all(|v| v.is_finite())));
        assert!(m.frames.windows(2).all(|w| w[0] == w[1]));
    }

    #[test]
    fn tone_is_finite() {
        let x: Vec<f64> = (0..4000).map(|i| (i as f64 * 0.2).sin() * 0.3).collect();
        let m = mfcc(&x, 8000, &MfccConfig::default());
        assert!(m.frames.iter().flatten().all(|v| v.is_finite()));
    }
}
