//! Binary classification metrics with negative as the detection class, and
//! committee comparison tables.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fusion::{weighted_majority, FusionConfig, FusionStrategy};
use crate::label::{Polarity, Vote};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    /// Negative predicted negative.
    pub tp: usize,
    /// Nonnegative predicted negative.
    pub fp: usize,
    pub tn: usize,
    /// Negative predicted nonnegative.
    pub fn_: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub n: usize,
    pub accuracy: f64,
    pub weighted_f1: f64,
    pub prec_pos: f64,
    pub prec_neg: f64,
    pub rec_pos: f64,
    pub rec_neg: f64,
    /// Set when some ratio had a zero denominator and was reported as 0.
    pub degenerate: bool,
}

fn ratio(num: usize, den: usize, degenerate: &mut bool) -> f64 {
    if den == 0 {
        *degenerate = true;
        0.0
    } else {
        num as f64 / den as f64
    }
}

fn f1(p: f64, r: f64) -> f64 {
    if p + r == 0.0 {
        0.0
    } else {
        2.0 * p * r / (p + r)
    }
}

impl ConfusionMatrix {
    pub fn from_pairs(preds: &[Polarity], truth: &[Polarity]) -> Result<ConfusionMatrix> {
        if preds.len() != truth.len() {
            return Err(Error::invalid(format!(
                "{} predictions for {} truth labels",
                preds.len(),
                truth.len()
            )));
        }
        let mut m = ConfusionMatrix::default();
        for (p, t) in preds.iter().zip(truth) {
            match (p.is_negative(), t.is_negative()) {
                (true, true) => m.tp += 1,
                (true, false) => m.fp += 1,
                (false, false) => m.tn += 1,
                (false, true) => m.fn_ += 1,
            }
        }
        Ok(m)
    }

    pub fn total(&self) -> usize {
        self.tp + self.fp + self.tn + self.fn_
    }

    pub fn support_neg(&self) -> usize {
        self.tp + self.fn_
    }

    pub fn support_pos(&self) -> usize {
        self.tn + self.fp
    }

    pub fn metrics(&self) -> Result<Metrics> {
        let n = self.total();
        if n == 0 {
            return Err(Error::invalid("no evaluated items"));
        }
        let mut degenerate = false;
        let prec_neg = ratio(self.tp, self.tp + self.fp, &mut degenerate);
        let rec_neg = ratio(self.tp, self.tp + self.fn_, &mut degenerate);
        let prec_pos = ratio(self.tn, self.tn + self.fn_, &mut degenerate);
        let rec_pos = ratio(self.tn, self.tn + self.fp, &mut degenerate);
        let weighted_f1 = (self.support_neg() as f64 * f1(prec_neg, rec_neg)
            + self.support_pos() as f64 * f1(prec_pos, rec_pos))
            / n as f64;
        Ok(Metrics {
            n,
            accuracy: (self.tp + self.tn) as f64 / n as f64,
            weighted_f1,
            prec_pos,
            prec_neg,
            rec_pos,
            rec_neg,
            degenerate,
        })
    }
}

pub fn metrics(preds: &[Polarity], truth: &[Polarity]) -> Result<Metrics> {
    ConfusionMatrix::from_pairs(preds, truth)?.metrics()
}

/// One test item: its true label and every committee member's vote.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalRecord {
    pub id: String,
    pub truth: Polarity,
    pub votes: BTreeMap<String, Vote>,
}

/// A row of the comparison table.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReportRow {
    Member(String),
    Strategy(FusionStrategy),
}

impl ReportRow {
    pub fn name(&self) -> String {
        match self {
            ReportRow::Member(m) => m.clone(),
            ReportRow::Strategy(FusionStrategy::TextOnly) => "text ensemble".into(),
            ReportRow::Strategy(FusionStrategy::AudioOnly) => "audio ensemble".into(),
            ReportRow::Strategy(FusionStrategy::TPlusA) => "T+A".into(),
            ReportRow::Strategy(FusionStrategy::Fus1) => "Fus1".into(),
            ReportRow::Strategy(FusionStrategy::Fus2) => "Fus2".into(),
        }
    }

    /// Every configured member followed by every strategy.
    pub fn all(fusion: &FusionConfig) -> Vec<ReportRow> {
        fusion
            .members
            .iter()
            .map(|m| ReportRow::Member(m.name.clone()))
            .chain(FusionStrategy::ALL.into_iter().map(ReportRow::Strategy))
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportLine {
    pub name: String,
    pub metrics: Option<Metrics>,
    /// Items the row could not decide (abstentions), left out of its metrics.
    pub undecided: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub lines: Vec<ReportLine>,
}

fn predict_row(row: &ReportRow, record: &EvalRecord, fusion: &FusionConfig) -> Option<Polarity> {
    match row {
        ReportRow::Member(name) => record.votes.get(name).and_then(|v| v.polarity()),
        ReportRow::Strategy(FusionStrategy::TPlusA) => weighted_majority(&fusion.vote_set(&record.votes, None)).ok(),
        ReportRow::Strategy(s) => fusion.outcome(&record.votes).ok().and_then(|o| o.get(*s)),
    }
}

pub fn compare_committees(records: &[EvalRecord], fusion: &FusionConfig, rows: &[ReportRow]) -> ComparisonReport {
    let lines = rows
        .iter()
        .map(|row| {
            let mut preds = Vec::new();
            let mut truth = Vec::new();
            for r in records {
                if let Some(p) = predict_row(row, r, fusion) {
                    preds.push(p);
                    truth.push(r.truth);
                }
            }
            ReportLine {
                name: row.name(),
                metrics: metrics(&preds, &truth).ok(),
                undecided: records.len() - preds.len(),
            }
        })
        .collect();
    ComparisonReport { lines }
}

impl ComparisonReport {
    pub const HEADER: [&'static str; 9] = [
        "model", "Acc.", "F1 (w)", "Prec.(+)", "Prec.(−)", "Rec.(+)", "Rec.(−)", "n", "undecided",
    ];

    pub fn line(&self, name: &str) -> Option<&ReportLine> {
        self.lines.iter().find(|l| l.name == name)
    }

    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(Self::HEADER)?;
        for l in &self.lines {
            let mut rec = vec![l.name.clone()];
            match &l.metrics {
                Some(m) => rec.extend(
                    [m.accuracy, m.weighted_f1, m.prec_pos, m.prec_neg, m.rec_pos, m.rec_neg]
                        .iter()
                        .map(|v| format!("{v:.4}"))
                        .chain([m.n.to_string()]),
                ),
                None => rec.extend(std::iter::repeat_n(String::new(), 6).chain(["0".to_string()])),
            }
            rec.push(l.undecided.to_string());
            w.write_record(&rec)?;
        }
        let bytes = w.into_inner().map_err(|e| Error::invalid(e.to_string()))?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }

    /// Fixed-width table for terminals.
    pub fn to_table(&self) -> String {
        let mut out = String::new();
        let width = self.lines.iter().map(|l| l.name.chars().count()).max().unwrap_or(5).max(5);
        let _ = write!(out, "{:<width$}", Self::HEADER[0]);
        for h in &Self::HEADER[1..7] {
            let _ = write!(out, "  {h:>8}");
        }
        out.push('\n');
        for l in &self.lines {
            let _ = write!(out, "{:<width$}", l.name);
            match &l.metrics {
                Some(m) => {
                    for v in [m.accuracy, m.weighted_f1, m.prec_pos, m.prec_neg, m.rec_pos, m.rec_neg] {
                        let _ = write!(out, "  {v:>8.3}");
                    }
                }
                None => out.push_str("  (no decisions)"),
            }
            out.push('\n');
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const N: Polarity = Polarity::Negative;
    const P: Polarity = Polarity::Nonnegative;

    #[test]
    fn perfect() {
        let t = vec![N, P, P, N];
        let m = metrics(&t, &t).unwrap();
        assert_eq!(
            [m.accuracy, m.weighted_f1, m.prec_pos, m.prec_neg, m.rec_pos, m.rec_neg],
            [1.0; 6]
        );
        assert!(!m.degenerate);
    }

    #[test]
    fn all_nonnegative_baseline() {
        let truth: Vec<Polarity> = std::iter::repeat_n(P, 1042).chain(std::iter::repeat_n(N, 848)).collect();
        let preds = vec![P; 1890];
        let m = metrics(&preds, &truth).unwrap();
        assert_eq!(m.accuracy, 1042.0 / 1890.0);
        assert_eq!(m.rec_neg, 0.0);
        assert_eq!(m.prec_neg, 0.0);
        assert!(m.degenerate);
    }

    #[test]
    fn hand_computed_confusion() {
        let c = ConfusionMatrix { tp: 3, fp: 1, fn_: 2, tn: 4 };
        let m = c.metrics().unwrap();
        assert_eq!(m.prec_neg, 0.75);
        assert_eq!(m.rec_neg, 0.6);
        assert_eq!(m.accuracy, 0.7);
    }

    #[test]
    fn length_mismatch() {
        assert!(metrics(&[N], &[N, P]).is_err());
        assert!(metrics(&[], &[]).is_err());
    }

    fn brute(preds: &[Polarity], truth: &[Polarity]) -> [f64; 6] {
        let n = preds.len() as f64;
        let count = |f: &dyn Fn(Polarity, Polarity) -> bool| preds.iter().zip(truth).filter(|(p, t)| f(**p, **t)).count() as f64;
        let div = |a: f64, b: f64| if b == 0.0 { 0.0 } else { a / b };
        let acc = count(&|p, t| p == t) / n;
        let mut f1w = 0.0;
        let mut out = [acc, 0.0, 0.0, 0.0, 0.0, 0.0];
        for (i, c) in [P, N].into_iter().enumerate() {
            let tp = count(&|p, t| p == c && t == c);
            let pred_c = count(&|p, _| p == c);
            let true_c = count(&|_, t| t == c);
            let prec = div(tp, pred_c);
            let rec = div(tp, true_c);
            let f = div(2.0 * prec * rec, prec + rec);
            f1w += true_c / n * f;
            out[2 + i] = prec;
            out[4 + i] = rec;
        }
        out[1] = f1w;
        out
    }

    proptest! {
        #[test]
        fn matches_brute_force(pairs in proptest::collection::vec((any::<bool>(), any::<bool>()), 1..60)) {
            let preds: Vec<Polarity> = pairs.iter().map(|p| if p.0 { N } else { P }).collect();
            let truth: Vec<Polarity> = pairs.iter().map(|p| if p.1 { N } else { P }).collect();
            let m = metrics(&preds, &truth).unwrap();
            let b = brute(&preds, &truth);
            let got = [m.accuracy, m.weighted_f1, m.prec_pos, m.prec_neg, m.rec_pos, m.rec_neg];
            for (g, e) in got.iter().zip(b) {
                prop_assert!((g - e).abs() < 1e-12);
            }
            prop_assert!((0.0..=1.0).contains(&m.weighted_f1));
        }
    }

    #[test]
    fn comparison_table() {
        let fusion = FusionConfig::default();
        let mk = |truth, lex, en| EvalRecord {
            id: String::new(),
            truth,
            votes: [("lexicon", lex), ("linear_12", Vote::Nonnegative), ("linear_1", Vote::Nonnegative), ("elastic_net", en), ("knn", en), ("random_forest", en), ("gmm", Vote::Nonnegative)]
                .into_iter()
                .map(|(k, v)| (k.to_string(), v))
                .collect(),
        };
        let records = vec![
            mk(N, Vote::Negative, Vote::Negative),
            mk(N, Vote::Nonnegative, Vote::Negative),
            mk(P, Vote::Nonnegative, Vote::Nonnegative),
        ];
        let report = compare_committees(&records, &fusion, &ReportRow::all(&fusion));
        let text = report.line("text ensemble").unwrap().metrics.unwrap();
        let fus2 = report.line("Fus2").unwrap().metrics.unwrap();
        let fus1 = report.line("Fus1").unwrap().metrics.unwrap();
        assert_eq!(text.rec_neg, 0.0);
        assert_eq!(fus1.rec_neg, 0.5);
        assert_eq!(fus2.rec_neg, 1.0);
        let one = compare_committees(&records, &fusion, &[ReportRow::Strategy(FusionStrategy::Fus2)]);
        assert_eq!(one.lines.len(), 1);
        let csv = report.to_csv().unwrap();
        assert!(csv.starts_with("model,Acc.,F1 (w),Prec.(+),Prec.(−),Rec.(+),Rec.(−),n,undecided\n"));
        assert_eq!(csv, compare_committees(&records, &fusion, &ReportRow::all(&fusion)).to_csv().unwrap());
        assert!(report.to_table().contains("Fus2"));
    }
}
