use serde::{Deserialize, Serialize};

/// Nine summary statistics of a frame-level feature track.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct AggStats9 {
    pub mean: f64,
    /// Population standard deviation.
    pub std: f64,
    pub q05: f64,
    pub q25: f64,
    pub q50: f64,
    pub q75: f64,
    pub q95: f64,
    /// `q95 - q05`.
    pub range_90: f64,
    /// `q75 - q25`.
    pub iqr: f64,
}

impl AggStats9 {
    pub const FIELDS: [&'static str; 9] = [
        "mean", "std", "q05", "q25", "q50", "q75", "q95", "range90", "iqr",
    ];

    pub fn to_array(&self) -> [f64; 9] {
        [
            self.mean,
            self.std,
            self.q05,
            self.q25,
            self.q50,
            self.q75,
            self.q95,
            self.range_90,
            self.iqr,
        ]
    }
}

/// Quantile of sorted data by linear interpolation between order
/// statistics: position `h = (n - 1) p`, value
/// `x[floor h] + (h - floor h) (x[floor h + 1] - x[floor h])`.
pub fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    let n = sorted.len();
    let h = (n - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(n - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Summary statistics of `values`; `None` for an empty list, which callers
/// treat as all-zero stats.
pub fn aggregate9(values: &[f64]) -> Option<AggStats9> {
    if values.is_empty() {
        return None;
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    let mut sum = 0.0;
    for v in &sorted {
        sum += v;
    }
    let mean = sum / n;
    let mut ss = 0.0;
    for v in &sorted {
        ss += (v - mean) * (v - mean);
    }
    let q05 = quantile_sorted(&sorted, 0.05);
    let q25 = quantile_sorted(&sorted, 0.25);
    let q50 = quantile_sorted(&sorted, 0.50);
    let q75 = quantile_sorted(&sorted, 0.75);
    let q95 = quantile_sorted(&sorted, 0.95);
    Some(AggStats9 {
        mean,
        std: (ss / n).sqrt(),
        q05,
        q25,
        q50,
        q75,
        q95,
        range_90: q95 - q05,
        iqr: q75 - q25,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn one_to_five() {
        let s = aggregate9(&[5.0, 1.0, 4.0, 2.0, 3.0]).unwrap();
        assert_eq!(s.mean, 3.0);
        assert_eq!(s.q50, 3.0);
        // h = 4 * 0.25 = 1 and 4 * 0.75 = 3 land on order statistics.
        assert_eq!(s.q25, 2.0);
        assert_eq!(s.q75, 4.0);
        assert_eq!(s.iqr, 2.0);
        // h = 0.2 and 3.8
        assert!((s.q05 - 1.2).abs() < 1e-12);
        assert!((s.q95 - 4.8).abs() < 1e-12);
        assert!((s.std - 2f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn constant_and_single() {
        let s = aggregate9(&[2.5; 7]).unwrap();
        assert_eq!(s.std, 0.0);
        assert_eq!([s.q05, s.q25, s.q50, s.q75, s.q95], [2.5; 5]);
        assert_eq!(s.range_90, 0.0);
        let s = aggregate9(&[-1.0]).unwrap();
        assert_eq!([s.q05, s.q50, s.q95, s.mean], [-1.0; 4]);
        assert_eq!(s.std, 0.0);
    }

    #[test]
    fn empty_is_flagged() {
        assert!(aggregate9(&[]).is_none());
    }

    proptest! {
        #[test]
        fn ordered_and_nonnegative(v in prop::collection::vec(-1e6f64..1e6, 1..60)) {
            let s = aggregate9(&v).unwrap();
            prop_assert!(s.q05 <= s.q25 && s.q25 <= s.q50 && s.q50 <= s.q75 && s.q75 <= s.q95);
            prop_assert!(s.range_90 >= 0.0 && s.iqr >= 0.0 && s.std >= 0.0);
        }
    }
}
