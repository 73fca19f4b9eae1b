//! Text committee: a lexicon-and-rules classifier, a weighted-loss linear
//! classifier on n-grams, and a client for external classifiers.

pub mod external;
pub mod lexicon;
pub mod linear;

pub use self::external::{ExternalClassifier, ExternalOutcome, ExternalRequest, ExternalVerdict, RawClass};
pub use self::lexicon::{lexicon_classify, Lexicon, LexiconConfig, LexiconScore};
pub use self::linear::{predict_linear, train_linear, LinearTextConfig, LinearTextModel, WeightedLogistic};

/// Lowercased tokens with apostrophes dropped and other punctuation treated
/// as separators, so "Don't!" becomes `["dont"]`.
pub fn tokenize(text: &str) -> Vec<String> {
    let mut out = Vec::new();
    let mut cur = String::new();
    for c in text.chars() {
        if c == '\'' || c == '\u{2019}' {
            continue;
        }
        if c.is_alphanumeric() {
            cur.extend(c.to_lowercase());
        } else if !cur.is_empty() {
            out.push(std::mem::take(&mut cur));
        }
    }
    if !cur.is_empty() {
        out.push(cur);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::tokenize;

    #[test]
    fn tokens() {
        assert_eq!(tokenize("Don't!  STOP,now"), vec!["dont", "stop", "now"]);
        assert!(tokenize("...").is_empty());
    }
}
