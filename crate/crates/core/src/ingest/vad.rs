//! Energy-based voice activity detection.
//!
//! A frame is voiced when its energy is within `energy_threshold_db` of the
//! median energy of the active frames, those above an absolute floor. The
//! relative test makes detection invariant to gain; the floor is what lets a
//! recording that only contains a noise floor come out empty.
//!
//! Frame decisions use `frame_len` windows. Segment edges are then refined
//! on hop-sized blocks so boundaries land within one hop of the true onset
//! and offset instead of being smeared by a full window.

use serde::{Deserialize, Serialize};

use crate::corpus::Span;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct VadConfig {
    /// Seconds.
    pub frame_len: f64,
    /// Seconds.
    pub hop: f64,
    /// Voicing threshold relative to the median active-frame energy, dB.
    pub energy_threshold_db: f64,
    /// Frames at or below this level (dB full scale) do not count towards
    /// the reference median; with no frame above it nothing is voiced.
    pub absolute_floor_dbfs: f64,
    pub min_silence_gap: f64,
    pub intro_pause: f64,
    pub max_pause: f64,
    pub min_chunk: f64,
    pub max_chunk: f64,
}

impl Default for VadConfig {
    fn default() -> Self {
        VadConfig {
            frame_len: 0.025,
            hop: 0.010,
            energy_threshold_db: -35.0,
            absolute_floor_dbfs: -50.0,
            min_silence_gap: 0.3,
            intro_pause: 1.0,
            max_pause: 5.0,
            min_chunk: 1.0,
            max_chunk: 20.0,
        }
    }
}

impl VadConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.hop > 0.0 && self.hop <= self.frame_len) {
            return Err(Error::invalid("vad: need 0 < hop <= frame_len"));
        }
        if !(self.intro_pause < self.max_pause) {
            return Err(Error::invalid("vad: need intro_pause < max_pause"));
        }
        if !(self.min_chunk < self.max_chunk) {
            return Err(Error::invalid("vad: need min_chunk < max_chunk"));
        }
        if self.min_silence_gap < 0.0 {
            return Err(Error::invalid("vad: min_silence_gap must be >= 0"));
        }
        Ok(())
    }

    pub fn frame_samples(&self, sample_rate: u32) -> usize {
        ((self.frame_len * sample_rate as f64).round() as usize).max(1)
    }

    pub fn hop_samples(&self, sample_rate: u32) -> usize {
        ((self.hop * sample_rate as f64).round() as usize).max(1)
    }
}

fn energy_db(block: &[f64]) -> f64 {
    if block.is_empty() {
        return f64::NEG_INFINITY;
    }
    let power = block.iter().map(|x| x * x).sum::<f64>() / block.len() as f64;
    10.0 * (power + 1e-20).log10()
}

/// Mean-square energy in dB of each `frame`-sample window advanced by `hop`.
pub fn frame_energies_db(samples: &[f64], frame: usize, hop: usize) -> Vec<f64> {
    if samples.len() < frame || frame == 0 || hop == 0 {
        return Vec::new();
    }
    let n = (samples.len() - frame) / hop + 1;
    (0..n)
        .map(|i| energy_db(&samples[i * hop..i * hop + frame]))
        .collect()
}

/// Voicing threshold in dB for a set of frame energies, or `None` when no
/// frame clears the absolute floor.
fn voicing_threshold(energies: &[f64], config: &VadConfig) -> Option<f64> {
    let mut active: Vec<f64> = energies
        .iter()
        .copied()
        .filter(|e| *e > config.absolute_floor_dbfs)
        .collect();
    if active.is_empty() {
        return None;
    }
    active.sort_by(f64::total_cmp);
    let n = active.len();
    let median = if n % 2 == 1 {
        active[n / 2]
    } else {
        0.5 * (active[n / 2 - 1] + active[n / 2])
    };
    Some(median + config.energy_threshold_db)
}

/// Per-frame voicing decisions.
pub fn voiced_frames(samples: &[f64], sample_rate: u32, config: &VadConfig) -> Vec<bool> {
    let energies = frame_energies_db(
        samples,
        config.frame_samples(sample_rate),
        config.hop_samples(sample_rate),
    );
    match voicing_threshold(&energies, config) {
        Some(th) => energies.iter().map(|e| *e > th).collect(),
        None => vec![false; energies.len()],
    }
}

/// Voiced regions as sample ranges, edges refined to hop resolution, before
/// any gap merging.
fn raw_regions(samples: &[f64], sample_rate: u32, config: &VadConfig) -> Vec<(usize, usize)> {
    let frame = config.frame_samples(sample_rate);
    let hop = config.hop_samples(sample_rate);
    let energies = frame_energies_db(samples, frame, hop);
    let Some(th) = voicing_threshold(&energies, config) else {
        return Vec::new();
    };
    let block_voiced = |b: usize| -> bool {
        let a = b * hop;
        if a >= samples.len() {
            return false;
        }
        let e = energy_db(&samples[a..(a + hop).min(samples.len())]);
        e > th
    };

    let mut regions = Vec::new();
    let mut i = 0;
    while i < energies.len() {
        if energies[i] <= th {
            i += 1;
            continue;
        }
        let first = i;
        while i < energies.len() && energies[i] > th {
            i += 1;
        }
        let last = i - 1;
        let coarse_start = first * hop;
        let coarse_end = (last * hop + frame).min(samples.len());

        let first_block_limit = (coarse_start + frame).div_ceil(hop);
        let start = (first..first_block_limit)
            .find(|&b| block_voiced(b))
            .map_or(coarse_start, |b| b * hop);
        let last_block = coarse_end.div_ceil(hop);
        let end = (last..last_block)
            .rev()
            .find(|&b| block_voiced(b))
            .map_or(coarse_end, |b| ((b + 1) * hop).min(samples.len()));
        if end > start {
            regions.push((start, end));
        }
    }
    regions
}

/// Voiced segments in seconds. Regions closer than `min_silence_gap` are
/// merged, so no silence longer than that (and hence no pause longer than
/// `max_pause`) lies inside a segment.
pub fn detect_voice_segments(samples: &[f64], sample_rate: u32, config: &VadConfig) -> Vec<Span> {
    let sr = sample_rate as f64;
    let gap = (config.min_silence_gap * sr).round() as usize;
    let mut merged: Vec<(usize, usize)> = Vec::new();
    for (s, e) in raw_regions(samples, sample_rate, config) {
        match merged.last_mut() {
            Some(prev) if s.saturating_sub(prev.1) < gap => prev.1 = prev.1.max(e),
            _ => merged.push((s, e)),
        }
    }
    merged
        .into_iter()
        .map(|(s, e)| Span::new(s as f64 / sr, e as f64 / sr))
        .collect()
}

/// Total unvoiced time in seconds (unvoiced frames times the hop), capped at
/// the buffer duration.
pub fn silence_time(samples: &[f64], sample_rate: u32, config: &VadConfig) -> f64 {
    let voiced = voiced_frames(samples, sample_rate, config);
    let unvoiced = voiced.iter().filter(|v| !**v).count();
    let total = samples.len() as f64 / sample_rate as f64;
    (unvoiced as f64 * config.hop).min(total)
}

/// Removes the robot introduction: returns the suffix that starts where the
/// first silence longer than `intro_pause` ends. Only silences bounded by
/// voice on both sides count. Returns the input unchanged if there is no
/// such silence and an empty slice if nothing is voiced.
pub fn strip_intro<'a>(samples: &'a [f64], sample_rate: u32, config: &VadConfig) -> &'a [f64] {
    let offset = intro_end(samples, sample_rate, config);
    &samples[offset..]
}

/// Sample index where [`strip_intro`]'s output begins.
pub fn intro_end(samples: &[f64], sample_rate: u32, config: &VadConfig) -> usize {
    if samples.is_empty() {
        return 0;
    }
    let regions = raw_regions(samples, sample_rate, config);
    if regions.is_empty() {
        return samples.len();
    }
    let min_gap = config.intro_pause * sample_rate as f64;
    regions
        .windows(2)
        .find(|w| (w[1].0 - w[0].1) as f64 > min_gap)
        .map_or(0, |w| w[1].0)
}

/// Longest silence (seconds) inside a buffer that is bounded by voice, plus
/// any leading or trailing unvoiced stretch.
pub fn longest_silence(samples: &[f64], sample_rate: u32, config: &VadConfig) -> f64 {
    let sr = sample_rate as f64;
    let regions = raw_regions(samples, sample_rate, config);
    if regions.is_empty() {
        return samples.len() as f64 / sr;
    }
    let mut longest = regions[0].0 as f64 / sr;
    for w in regions.windows(2) {
        longest = longest.max((w[1].0 - w[0].1) as f64 / sr);
    }
    let tail = samples.len() - regions.last().unwrap().1;
    longest.max(tail as f64 / sr)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    const SR: u32 = 8000;

    /// Tone bursts over a quiet noise floor. `plan` is (seconds, voiced).
    pub(crate) fn render(plan: &[(f64, bool)], seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut out = Vec::new();
        for &(secs, voiced) in plan {
            let n = (secs * SR as f64).round() as usize;
            for i in 0..n {
                let t = i as f64 / SR as f64;
                let noise = (rng.random::<f64>() - 0.5) * 2e-4;
                let v = if voiced {
                    0.2 * (2.0 * std::f64::consts::PI * 180.0 * t).sin()
                        + 0.05 * (2.0 * std::f64::consts::PI * 720.0 * t).sin()
                } else {
                    0.0
                };
                out.push(v + noise);
            }
        }
        out
    }

    fn assert_spans(got: &[Span], want: &[(f64, f64)], tol: f64) {
        assert_eq!(got.len(), want.len(), "got {got:?}");
        for (g, w) in got.iter().zip(want) {
            assert!((g.start - w.0).abs() <= tol, "start {} vs {}", g.start, w.0);
            assert!((g.end - w.1).abs() <= tol, "end {} vs {}", g.end, w.1);
        }
    }

    #[test]
    fn long_pause_splits_segments() {
        let x = render(&[(3.0, true), (6.0, false), (3.0, true)], 1);
        let segs = detect_voice_segments(&x, SR, &VadConfig::default());
        assert_spans(&segs, &[(0.0, 3.0), (9.0, 12.0)], 0.01);
    }

    #[test]
    fn short_gap_merges() {
        let x = render(&[(1.0, true), (0.2, false), (1.0, true)], 2);
        let segs = detect_voice_segments(&x, SR, &VadConfig::default());
        assert_spans(&segs, &[(0.0, 2.2)], 0.01);
    }

    #[test]
    fn noise_floor_only_is_silent() {
        // White noise with RMS at -60 dBFS.
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let sigma = 10f64.powf(-60.0 / 20.0);
        let x: Vec<f64> = (0..SR as usize * 4)
            .map(|_| {
                let u1: f64 = rng.random::<f64>().max(1e-12);
                let u2: f64 = rng.random();
                sigma * (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
            })
            .collect();
        // Reference: every frame energy must sit below the voicing floor.
        let cfg = VadConfig::default();
        let energies = frame_energies_db(&x, cfg.frame_samples(SR), cfg.hop_samples(SR));
        assert!(energies.iter().all(|e| *e < cfg.absolute_floor_dbfs));
        assert!(detect_voice_segments(&x, SR, &cfg).is_empty());
    }

    #[test]
    fn strip_intro_cuts_after_first_long_pause() {
        let x = render(&[(2.0, true), (1.5, false), (3.0, true)], 4);
        let cfg = VadConfig::default();
        let start = intro_end(&x, SR, &cfg) as f64 / SR as f64;
        assert!((start - 3.5).abs() <= cfg.hop, "{start}");
        assert_eq!(strip_intro(&x, SR, &cfg).len(), x.len() - intro_end(&x, SR, &cfg));
    }

    #[test]
    fn strip_intro_without_long_pause_is_identity() {
        let x = render(&[(2.0, true), (0.5, false), (3.0, true), (2.0, false)], 5);
        assert_eq!(strip_intro(&x, SR, &VadConfig::default()).len(), x.len());
    }

    #[test]
    fn strip_intro_on_silence_is_empty() {
        let x = render(&[(3.0, false)], 6);
        assert!(strip_intro(&x, SR, &VadConfig::default()).is_empty());
        assert!(strip_intro(&[], SR, &VadConfig::default()).is_empty());
    }

    #[test]
    fn strip_intro_is_idempotent_once_the_intro_is_gone() {
        let x = render(&[(2.0, true), (1.5, false), (3.0, true), (0.6, false), (2.0, true)], 7);
        let cfg = VadConfig::default();
        let once = strip_intro(&x, SR, &cfg);
        let twice = strip_intro(once, SR, &cfg);
        assert_eq!(once, twice);
    }

    #[test]
    fn detection_is_gain_invariant() {
        let x = render(&[(1.0, false), (2.0, true), (0.8, false), (1.5, true), (1.0, false)], 8);
        let cfg = VadConfig::default();
        let base = detect_voice_segments(&x, SR, &cfg);
        for g in [0.5, 2.0, 3.0] {
            let y: Vec<f64> = x.iter().map(|v| v * g).collect();
            assert_eq!(detect_voice_segments(&y, SR, &cfg), base, "gain {g}");
        }
    }

    #[test]
    fn config_validation() {
        assert!(VadConfig::default().validate().is_ok());
        let bad = VadConfig {
            hop: 0.05,
            ..VadConfig::default()
        };
        assert!(bad.validate().is_err());
        let bad = VadConfig {
            intro_pause: 6.0,
            ..VadConfig::default()
        };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn silence_time_counts_unvoiced_frames() {
        let x = render(&[(1.0, true), (0.5, false), (1.0, true)], 9);
        let t = silence_time(&x, SR, &VadConfig::default());
        assert!((t - 0.5).abs() < 0.06, "{t}");
    }
}
