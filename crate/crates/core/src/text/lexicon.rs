//! Valence lexicon with boosters and negators.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::tokenize;
use crate::error::{Error, Result};
use crate::label::Polarity;

const BUNDLED: &str = include_str!("../../data/lexicon.tsv");

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LexiconConfig {
    /// Compound scores strictly below this are negative.
    pub threshold: f64,
    /// Normalization constant in `s / sqrt(s^2 + alpha)`.
    pub alpha: f64,
    /// How many preceding tokens a negator reaches.
    pub negation_window: usize,
}

impl Default for LexiconConfig {
    fn default() -> Self {
        LexiconConfig {
            threshold: -0.05,
            alpha: 15.0,
            negation_window: 3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Lexicon {
    valence: BTreeMap<String, f64>,
    boosters: BTreeMap<String, f64>,
    negators: BTreeSet<String>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LexiconScore {
    pub label: Polarity,
    pub compound: f64,
}

#[derive(Clone, Copy)]
enum Section {
    Valence,
    Boosters,
    Negators,
}

impl Lexicon {
    pub fn bundled() -> Lexicon {
        Lexicon::parse(BUNDLED).expect("bundled lexicon parses")
    }

    pub fn load(path: &Path) -> Result<Lexicon> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Lexicon::parse(&text).map_err(|e| Error::Corrupt {
            path: path.to_path_buf(),
            reason: e.to_string(),
        })
    }

    /// Parses the sectioned TSV format. Lines before any header are valences;
    /// `#` starts a comment line.
    pub fn parse(text: &str) -> Result<Lexicon> {
        let mut lex = Lexicon::default();
        let mut section = Section::Valence;
        for (n, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let bad = |why: &str| Error::invalid(format!("lexicon line {}: {why}", n + 1));
            match line {
                "[valence]" => section = Section::Valence,
                "[boosters]" => section = Section::Boosters,
                "[negators]" => section = Section::Negators,
                _ if line.starts_with('[') => return Err(bad("unknown section")),
                _ => match section {
                    Section::Negators => {
                        lex.negators.insert(line.to_lowercase());
                    }
                    Section::Valence | Section::Boosters => {
                        let (term, value) = line.split_once('\t').ok_or_else(|| bad("expected term<TAB>value"))?;
                        let v: f64 = value.trim().parse().map_err(|_| bad("value is not a number"))?;
                        if !v.is_finite() {
                            return Err(bad("value is not finite"));
                        }
                        let term = term.trim().to_lowercase();
                        if let Section::Boosters = section {
                            if v <= 0.0 {
                                return Err(bad("multiplier must be positive"));
                            }
                            lex.boosters.insert(term, v);
                        } else {
                            lex.valence.insert(term, v);
                        }
                    }
                },
            }
        }
        Ok(lex)
    }

    pub fn valence(&self, term: &str) -> Option<f64> {
        self.valence.get(term).copied()
    }

    pub fn insert_valence(&mut self, term: &str, score: f64) -> Result<()> {
        if !score.is_finite() {
            return Err(Error::invalid("valence must be finite"));
        }
        self.valence.insert(term.to_lowercase(), score);
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.valence.len()
    }

    pub fn is_empty(&self) -> bool {
        self.valence.is_empty()
    }
}

/// Scores `text` and thresholds the compound score.
pub fn lexicon_classify(text: &str, lexicon: &Lexicon, config: &LexiconConfig) -> LexiconScore {
    let tokens = tokenize(text);
    let mut sum = 0.0;
    for (i, tok) in tokens.iter().enumerate() {
        let Some(mut v) = lexicon.valence(tok) else {
            continue;
        };
        if i > 0 {
            if let Some(m) = lexicon.boosters.get(&tokens[i - 1]) {
                v *= m;
            }
        }
        let lo = i.saturating_sub(config.negation_window);
        if tokens[lo..i].iter().any(|t| lexicon.negators.contains(t)) {
            v = -v;
        }
        sum += v;
    }
    let compound = if sum == 0.0 { 0.0 } else { sum / (sum * sum + config.alpha).sqrt() };
    let label = if compound < config.threshold {
        Polarity::Negative
    } else {
        Polarity::Nonnegative
    };
    LexiconScore { label, compound }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn classify(text: &str) -> LexiconScore {
        lexicon_classify(text, &Lexicon::bundled(), &LexiconConfig::default())
    }

    #[test]
    fn bundled_anchor_values() {
        let lex = Lexicon::bundled();
        assert_eq!(lex.valence("worst"), Some(-3.0));
        assert_eq!(lex.valence("good"), Some(1.9));
    }

    #[test]
    fn worst_is_negative() {
        let s = classify("your service is the worst");
        assert_eq!(s.label, Polarity::Negative);
        let expected = -3.0 / (9.0f64 + 15.0).sqrt();
        assert!((s.compound - expected).abs() < 1e-12);
    }

    #[test]
    fn thanks_is_nonnegative() {
        assert_eq!(classify("thank you so much").label, Polarity::Nonnegative);
    }

    #[test]
    fn not_good_is_negated() {
        let s = classify("not good");
        // -1.9 / sqrt(1.9^2 + 15)
        let expected = -1.9 / (1.9f64 * 1.9 + 15.0).sqrt();
        assert!((s.compound - expected).abs() < 1e-12);
        assert!(s.compound < -0.05);
        assert_eq!(s.label, Polarity::Negative);
    }

    #[test]
    fn negator_window_is_three_tokens() {
        assert!(classify("not at all good").compound < 0.0);
        assert!(classify("not at all very good").compound > 0.0);
    }

    #[test]
    fn booster_scales() {
        let plain = classify("bad").compound;
        let boosted = classify("very bad").compound;
        assert!(boosted < plain);
    }

    #[test]
    fn empty_text() {
        let s = classify("");
        assert_eq!((s.label, s.compound), (Polarity::Nonnegative, 0.0));
    }

    #[test]
    fn parse_errors() {
        assert!(Lexicon::parse("bad\t-x").is_err());
        assert!(Lexicon::parse("[boosters]\nvery\t0").is_err());
        assert!(Lexicon::parse("[other]").is_err());
        assert!(Lexicon::parse("bad").is_err());
        let lex = Lexicon::parse("Bad\t-2\n[negators]\nNot").unwrap();
        assert_eq!(lex.valence("bad"), Some(-2.0));
    }

    proptest! {
        #[test]
        fn case_and_trailing_punctuation(words in proptest::collection::vec(
            prop::sample::select(vec!["bad", "good", "not", "very", "the", "worst", "thanks", "card", "no"]), 0..8),
            upper in any::<bool>(), punct in prop::sample::select(vec!["", ".", "!", "?!", "..."])) {
            let text = words.join(" ");
            let base = classify(&text);
            let variant = if upper { text.to_uppercase() } else { text.clone() } + punct;
            let v = classify(&variant);
            prop_assert_eq!(base, v);
            prop_assert!((-1.0..=1.0).contains(&base.compound));
        }
    }
}
