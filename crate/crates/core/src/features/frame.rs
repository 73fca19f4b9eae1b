use std::f64::consts::PI;

/// Splits `samples` into `frame_len`-sample windows advanced by `hop`.
/// Yields `floor((N - L) / H) + 1` frames when `N >= L`, none otherwise.
pub fn frame_signal(samples: &[f64], frame_len: usize, hop: usize) -> Vec<&[f64]> {
    assert!(hop > 0 && frame_len >= hop, "need frame_len >= hop > 0");
    frame_count(samples.len(), frame_len, hop)
        .map(|n| (0..n).map(|i| &samples[i * hop..i * hop + frame_len]).collect())
        .unwrap_or_default()
}

pub fn frame_count(n: usize, frame_len: usize, hop: usize) -> Option<usize> {
    (n >= frame_len && frame_len > 0).then(|| (n - frame_len) / hop + 1)
}

/// Periodic Hann window.
pub fn hann(len: usize) -> Vec<f64> {
    (0..len)
        .map(|i| 0.5 - 0.5 * (2.0 * PI * i as f64 / len as f64).cos())
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn frame_counts() {
        let x = vec![0.0; 400];
        assert_eq!(frame_signal(&x, 200, 80).len(), 3);
        assert_eq!(frame_signal(&x[..199], 200, 80).len(), 0);
        assert_eq!(frame_signal(&x[..200], 200, 80).len(), 1);
    }

    #[test]
    fn frames_are_contiguous_views() {
        let x: Vec<f64> = (0..10).map(f64::from).collect();
        let frames = frame_signal(&x, 4, 3);
        assert_eq!(frames, vec![&x[0..4], &x[3..7], &x[6..10]]);
    }

    #[test]
    fn hann_endpoints() {
        let w = hann(8);
        assert_eq!(w[0], 0.0);
        assert!((w[4] - 1.0).abs() < 1e-12);
    }
}
