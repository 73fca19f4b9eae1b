//! Per-speaker negative scores with tercile weights, cumulative curves, and
//! plot-ready exports.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::corpus::{Call, Corpus, Role, Utterance};
use crate::error::{Error, Result};
use crate::label::Polarity;

pub const TERCILE_WEIGHTS: [f64; 3] = [0.8, 1.0, 1.2];

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Normalization {
    /// Divide by the sum of weights, so an all-negative role scores 1.
    #[default]
    WeightSum,
    /// Divide by the utterance count; scores can reach 1.2.
    Count,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ScoringConfig {
    pub normalization: Normalization,
}

/// The two tercile edges of a call.
pub fn tercile_boundaries(duration: f64) -> [f64; 2] {
    [duration / 3.0, 2.0 * duration / 3.0]
}

/// Weight by the third of the call containing `t_mid`; a point on an edge
/// belongs to the later third.
pub fn tercile_weight(t_mid: f64, duration: f64) -> f64 {
    let [b1, b2] = tercile_boundaries(duration);
    if t_mid < b1 {
        TERCILE_WEIGHTS[0]
    } else if t_mid < b2 {
        TERCILE_WEIGHTS[1]
    } else {
        TERCILE_WEIGHTS[2]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScoredUtterance {
    pub start: f64,
    pub end: f64,
    pub negative: bool,
}

impl ScoredUtterance {
    pub fn midpoint(&self) -> f64 {
        (self.start + self.end) / 2.0
    }
}

fn denominator(utts: &[ScoredUtterance], duration: f64, norm: Normalization) -> f64 {
    match norm {
        Normalization::WeightSum => utts.iter().map(|u| tercile_weight(u.midpoint(), duration)).sum(),
        Normalization::Count => utts.len() as f64,
    }
}

/// `None` when the role has no utterances.
pub fn negative_score(utts: &[ScoredUtterance], duration: f64, norm: Normalization) -> Option<f64> {
    if utts.is_empty() {
        return None;
    }
    let num: f64 = utts
        .iter()
        .filter(|u| u.negative)
        .map(|u| tercile_weight(u.midpoint(), duration))
        .sum();
    Some(num / denominator(utts, duration, norm))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    /// Utterance midpoint, seconds.
    pub t: f64,
    pub value: f64,
}

/// One point per utterance (time-ordered input): the weighted negative
/// count so far over the role's full normalizer.
pub fn cumulative_curve(utts: &[ScoredUtterance], duration: f64, norm: Normalization) -> Vec<CurvePoint> {
    if utts.is_empty() {
        return Vec::new();
    }
    let den = denominator(utts, duration, norm);
    let mut acc = 0.0;
    utts.iter()
        .map(|u| {
            if u.negative {
                acc += tercile_weight(u.midpoint(), duration);
            }
            CurvePoint {
                t: u.midpoint(),
                value: acc / den,
            }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoleProfile {
    pub role: Role,
    pub utterances: usize,
    pub negative_score: f64,
    pub curve: Vec<CurvePoint>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CallSentimentProfile {
    pub call_id: String,
    pub duration: f64,
    pub tercile_boundaries: [f64; 2],
    #[serde(skip_serializing_if = "Option::is_none")]
    pub csr: Option<RoleProfile>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub customer: Option<RoleProfile>,
}

impl CallSentimentProfile {
    pub fn roles(&self) -> impl Iterator<Item = &RoleProfile> {
        self.csr.iter().chain(self.customer.iter())
    }
}

/// Profiles one call. `label_of` supplies each utterance's polarity (human
/// or machine); utterances without one are skipped.
pub fn profile_call<'a>(
    call: &Call,
    utterances: impl IntoIterator<Item = &'a Utterance>,
    label_of: impl Fn(&Utterance) -> Option<Polarity>,
    config: &ScoringConfig,
) -> Result<CallSentimentProfile> {
    let mut by_role: BTreeMap<Role, Vec<ScoredUtterance>> = BTreeMap::new();
    let mut any = false;
    let mut utts: Vec<&Utterance> = utterances.into_iter().collect();
    utts.sort_by(|a, b| a.start.total_cmp(&b.start));
    for u in utts {
        let Some(p) = label_of(u) else { continue };
        any = true;
        if matches!(u.role, Role::Csr | Role::Customer) {
            by_role.entry(u.role).or_default().push(ScoredUtterance {
                start: u.start,
                end: u.end,
                negative: p.is_negative(),
            });
        }
    }
    if !any {
        return Err(Error::invalid(format!("call {} is unlabeled", call.call_id)));
    }
    let role_profile = |role: Role| {
        by_role.get(&role).map(|s| RoleProfile {
            role,
            utterances: s.len(),
            negative_score: negative_score(s, call.duration, config.normalization).expect("non-empty"),
            curve: cumulative_curve(s, call.duration, config.normalization),
        })
    };
    Ok(CallSentimentProfile {
        call_id: call.call_id.clone(),
        duration: call.duration,
        tercile_boundaries: tercile_boundaries(call.duration),
        csr: role_profile(Role::Csr),
        customer: role_profile(Role::Customer),
    })
}

/// Profiles a stored call using assigned labels, falling back to
/// `predictions` for unlabeled utterances.
pub fn profile_corpus_call(
    corpus: &Corpus,
    call_id: &str,
    predictions: &BTreeMap<String, Polarity>,
    config: &ScoringConfig,
) -> Result<CallSentimentProfile> {
    let call = corpus.call(call_id)?;
    let utts = corpus.call_utterances(call_id)?;
    profile_call(
        call,
        utts.into_iter().filter(|u| u.is_speech()),
        |u| u.polarity().or_else(|| predictions.get(&u.utterance_id).copied()),
        config,
    )
}

fn role_name(role: Role) -> &'static str {
    match role {
        Role::Csr => "csr",
        Role::Customer => "customer",
        Role::Unknown => "unknown",
    }
}

/// Delimited rows `call_id,role,t,cumulative_value`; each role ends with a
/// `total` row carrying its negative score.
pub fn profiles_to_csv(profiles: &[CallSentimentProfile]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["call_id", "role", "t", "cumulative_value"])?;
    for p in profiles {
        for r in p.roles() {
            for pt in &r.curve {
                w.write_record([p.call_id.as_str(), role_name(r.role), &pt.t.to_string(), &pt.value.to_string()])?;
            }
            w.write_record([p.call_id.as_str(), role_name(r.role), "total", &r.negative_score.to_string()])?;
        }
    }
    let bytes = w.into_inner().map_err(|e| Error::invalid(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

/// A static line chart of the cumulative curves of each profile.
pub fn profiles_to_svg(profiles: &[CallSentimentProfile]) -> String {
    const W: f64 = 640.0;
    const H: f64 = 360.0;
    const PAD: f64 = 48.0;
    const COLORS: [&str; 6] = ["#c0392b", "#2471a3", "#d68910", "#229954", "#7d3c98", "#566573"];
    let max_t = profiles.iter().map(|p| p.duration).fold(1.0, f64::max);
    let max_v = profiles
        .iter()
        .flat_map(|p| p.roles().flat_map(|r| r.curve.iter().map(|c| c.value)))
        .fold(1.0, f64::max);
    let x = |t: f64| PAD + t / max_t * (W - 2.0 * PAD);
    let y = |v: f64| H - PAD - v / max_v * (H - 2.0 * PAD);

    let mut s = String::new();
    let _ = writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" font-family="sans-serif" font-size="11">"#);
    let _ = writeln!(s, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<path d="M{PAD},{PAD} V{} H{}" stroke="black" fill="none"/>"#,
        H - PAD,
        W - PAD
    );
    let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="middle">time (s)</text>"#, W / 2.0, H - 12.0);
    let _ = writeln!(s, r#"<text x="12" y="{}" transform="rotate(-90 12 {})" text-anchor="middle">cumulative negative score</text>"#, H / 2.0, H / 2.0);
    let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="end">{max_t:.0}</text>"#, W - PAD, H - PAD + 14.0);
    let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="end">{max_v:.2}</text>"#, PAD - 4.0, PAD + 4.0);
    let mut series = 0;
    for p in profiles {
        for r in p.roles() {
            let color = COLORS[series % COLORS.len()];
            let dash = if r.role == Role::Csr { r#" stroke-dasharray="5,3""# } else { "" };
            let mut d = format!("M{:.1},{:.1}", x(0.0), y(0.0));
            for c in &r.curve {
                let _ = write!(d, " H{:.1} V{:.1}", x(c.t), y(c.value));
            }
            let _ = write!(d, " H{:.1}", x(p.duration));
            let _ = writeln!(s, r#"<path d="{d}" stroke="{color}" fill="none" stroke-width="1.5"{dash}/>"#);
            let _ = writeln!(
                s,
                r#"<text x="{}" y="{}" fill="{color}">{} {} ({:.3})</text>"#,
                W - PAD - 150.0,
                PAD + 14.0 * series as f64,
                xml_escape(&p.call_id),
                role_name(r.role),
                r.negative_score
            );
            series += 1;
        }
    }
    s.push_str("</svg>\n");
    s
}

fn xml_escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::tests::{call_with, utt};
    use proptest::prelude::*;

    fn thirds(neg: [bool; 3]) -> Vec<ScoredUtterance> {
        // Duration 9, one utterance centered in each third.
        [(0.0, 2.0), (4.0, 5.0), (7.0, 9.0)]
            .iter()
            .zip(neg)
            .map(|(&(start, end), negative)| ScoredUtterance { start, end, negative })
            .collect()
    }

    #[test]
    fn tercile_examples() {
        assert_eq!(tercile_weight(60.0, 540.0), 0.8);
        assert_eq!(tercile_weight(540.0 / 3.0, 540.0), 1.0);
        assert_eq!(tercile_weight(2.0 * 540.0 / 3.0, 540.0), 1.2);
        assert_eq!(tercile_weight(540.0, 540.0), 1.2);
        assert_eq!(tercile_weight(0.0, 540.0), 0.8);
    }

    #[test]
    fn score_examples() {
        let n = Normalization::WeightSum;
        assert!((negative_score(&thirds([true; 3]), 9.0, n).unwrap() - 1.0).abs() < 1e-12);
        assert!((negative_score(&thirds([false, false, true]), 9.0, n).unwrap() - 0.4).abs() < 1e-12);
        assert_eq!(negative_score(&thirds([false; 3]), 9.0, n).unwrap(), 0.0);
        assert_eq!(negative_score(&[], 9.0, n), None);
        let by_count = negative_score(&thirds([false, false, true]), 9.0, Normalization::Count).unwrap();
        assert!((by_count - 0.4).abs() < 1e-12);
        assert!((negative_score(&thirds([true; 3]), 9.0, Normalization::Count).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn curve_examples() {
        let flat = cumulative_curve(&thirds([false; 3]), 9.0, Normalization::WeightSum);
        assert!(flat.iter().all(|p| p.value == 0.0));
        let step = cumulative_curve(&thirds([true, false, false]), 9.0, Normalization::WeightSum);
        assert!(step[0].value > 0.0 && step[0].value == step[2].value);
    }

    proptest! {
        #[test]
        fn curve_ends_at_score(neg in proptest::collection::vec(any::<bool>(), 1..40), dur in 10.0f64..2000.0) {
            let n = neg.len();
            let utts: Vec<ScoredUtterance> = neg.iter().enumerate().map(|(i, &negative)| {
                let start = dur * i as f64 / n as f64;
                ScoredUtterance { start, end: start + dur / n as f64 * 0.9, negative }
            }).collect();
            for norm in [Normalization::WeightSum, Normalization::Count] {
                let s = negative_score(&utts, dur, norm).unwrap();
                let c = cumulative_curve(&utts, dur, norm);
                prop_assert!((c.last().unwrap().value - s).abs() < 1e-12);
                prop_assert!(c.windows(2).all(|w| w[1].value >= w[0].value));
            }
            let s = negative_score(&utts, dur, Normalization::WeightSum).unwrap();
            prop_assert!((0.0..=1.0 + 1e-12).contains(&s));
            prop_assert_eq!(s == 1.0, neg.iter().all(|&b| b));
        }

        #[test]
        fn permuting_within_tercile(neg in proptest::collection::vec(any::<bool>(), 9), seed in any::<u64>()) {
            let dur = 90.0;
            let utts: Vec<ScoredUtterance> = neg.iter().enumerate()
                .map(|(i, &negative)| ScoredUtterance { start: i as f64 * 10.0, end: i as f64 * 10.0 + 8.0, negative })
                .collect();
            let mut permuted = utts.clone();
            // Rotate labels inside each third.
            for block in 0..3 {
                let r = ((seed >> (block * 8)) % 3) as usize;
                let mut labels: Vec<bool> = permuted[block * 3..block * 3 + 3].iter().map(|u| u.negative).collect();
                labels.rotate_left(r);
                for (u, l) in permuted[block * 3..block * 3 + 3].iter_mut().zip(labels) {
                    u.negative = l;
                }
            }
            prop_assert_eq!(
                negative_score(&utts, dur, Normalization::WeightSum),
                negative_score(&permuted, dur, Normalization::WeightSum)
            );
        }
    }

    fn role_call(id: &str, pattern: &[(Role, bool)]) -> (Call, Vec<Utterance>, BTreeMap<String, Polarity>) {
        let mut utts = Vec::new();
        let mut labels = BTreeMap::new();
        for (i, (role, neg)) in pattern.iter().enumerate() {
            let speaker = if *role == Role::Csr { "a" } else { "b" };
            let mut u = utt(id, i as f64 * 10.0, i as f64 * 10.0 + 8.0, speaker, "words here");
            u.role = *role;
            labels.insert(u.utterance_id.clone(), if *neg { Polarity::Negative } else { Polarity::Nonnegative });
            utts.push(u);
        }
        let mut call = call_with(id, &utts);
        call.duration = pattern.len() as f64 * 10.0;
        (call, utts, labels)
    }

    #[test]
    fn bad_and_good_calls() {
        use Role::{Csr, Customer};
        let bad: Vec<(Role, bool)> = (0..12)
            .map(|i| if i % 2 == 0 { (Customer, true) } else { (Csr, i >= 8) })
            .collect();
        let (call, utts, labels) = role_call("bad", &bad);
        let p = profile_call(&call, &utts, |u| labels.get(&u.utterance_id).copied(), &ScoringConfig::default()).unwrap();
        let (cust, csr) = (p.customer.as_ref().unwrap(), p.csr.as_ref().unwrap());
        assert!(cust.negative_score > csr.negative_score);
        assert!(cust.curve.last().unwrap().value > cust.curve[0].value);
        assert!(csr.curve.last().unwrap().value > csr.curve[0].value);

        let good: Vec<(Role, bool)> = (0..12).map(|i| (if i % 2 == 0 { Customer } else { Csr }, i < 4)).collect();
        let (call, utts, labels) = role_call("good", &good);
        let p = profile_call(&call, &utts, |u| labels.get(&u.utterance_id).copied(), &ScoringConfig::default()).unwrap();
        let cust = p.customer.as_ref().unwrap();
        let early_plain = 2.0 / 6.0;
        assert!(cust.negative_score < early_plain);
        let tail: Vec<f64> = cust.curve.iter().filter(|c| c.t > 40.0).map(|c| c.value).collect();
        assert!(tail.windows(2).all(|w| w[0] == w[1]));

        assert!(profile_call(&call, &utts, |_| None, &ScoringConfig::default()).is_err());
        let csv = profiles_to_csv(std::slice::from_ref(&p)).unwrap();
        assert!(csv.starts_with("call_id,role,t,cumulative_value\n"));
        assert!(csv.contains("good,customer,total,"));
        let svg = profiles_to_svg(&[p]);
        assert!(svg.starts_with("<svg") && svg.trim_end().ends_with("</svg>"));
    }
}
