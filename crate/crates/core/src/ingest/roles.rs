use serde::{Deserialize, Serialize};

use crate::corpus::{Role, Utterance};

pub const DEFAULT_CUES: &[&str] = &["how can i help"];

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RoleAssignment {
    pub csr_speaker: Option<String>,
    /// True when no cue phrase matched and the first speaker was assumed.
    pub low_confidence: bool,
}

/// Lowercases, drops punctuation, and collapses whitespace.
pub fn normalize_text(text: &str) -> String {
    text.chars()
        .map(|c| {
            if c.is_alphanumeric() || c.is_whitespace() {
                c.to_ascii_lowercase()
            } else if c == '\'' || c == '\u{2019}' {
                '\0'
            } else {
                ' '
            }
        })
        .filter(|c| *c != '\0')
        .collect::<String>()
        .split_whitespace()
        .collect::<Vec<_>>()
        .join(" ")
}

fn contains_phrase(normalized_text: &str, normalized_cue: &str) -> bool {
    if normalized_cue.is_empty() {
        return false;
    }
    format!(" {normalized_text} ").contains(&format!(" {normalized_cue} "))
}

/// Labels the speaker who utters a cue phrase as CSR and everyone else as
/// customer. The earliest cue wins; equal start times go to the
/// lexicographically smaller speaker id. Without any cue the first speaker
/// becomes CSR and the assignment is marked low-confidence.
pub fn assign_roles<S: AsRef<str>>(utterances: &mut [Utterance], cues: &[S]) -> RoleAssignment {
    let cues: Vec<String> = cues.iter().map(|c| normalize_text(c.as_ref())).collect();
    let cue_hit = utterances
        .iter()
        .filter(|u| {
            let text = normalize_text(&u.transcript);
            cues.iter().any(|c| contains_phrase(&text, c))
        })
        .min_by(|a, b| {
            a.start
                .total_cmp(&b.start)
                .then_with(|| a.speaker_id.cmp(&b.speaker_id))
        })
        .map(|u| u.speaker_id.clone());

    let (csr, low_confidence) = match cue_hit {
        Some(s) => (Some(s), false),
        None => (
            utterances
                .iter()
                .min_by(|a, b| {
                    a.start
                        .total_cmp(&b.start)
                        .then_with(|| a.speaker_id.cmp(&b.speaker_id))
                })
                .map(|u| u.speaker_id.clone()),
            true,
        ),
    };
    for u in utterances.iter_mut() {
        u.role = match &csr {
            Some(c) if *c == u.speaker_id => Role::Csr,
            Some(_) => Role::Customer,
            None => Role::Unknown,
        };
    }
    RoleAssignment {
        csr_speaker: csr,
        low_confidence,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::tests::utt;

    #[test]
    fn cue_phrase_marks_csr() {
        let mut utts = vec![
            utt("c", 0.0, 1.0, "spkB", "hi there"),
            utt("c", 1.5, 3.0, "spkA", "How can I help you today?"),
            utt("c", 3.5, 5.0, "spkB", "my card"),
        ];
        let r = assign_roles(&mut utts, DEFAULT_CUES);
        assert_eq!(r.csr_speaker.as_deref(), Some("spkA"));
        assert!(!r.low_confidence);
        assert_eq!(utts[0].role, Role::Customer);
        assert_eq!(utts[1].role, Role::Csr);
    }

    #[test]
    fn no_cue_falls_back_to_first_speaker() {
        let mut utts = vec![
            utt("c", 0.5, 1.0, "spkB", "hello"),
            utt("c", 1.5, 3.0, "spkA", "hi"),
        ];
        let r = assign_roles(&mut utts, DEFAULT_CUES);
        assert_eq!(r.csr_speaker.as_deref(), Some("spkB"));
        assert!(r.low_confidence);
    }

    #[test]
    fn earliest_cue_wins_and_ties_break_by_speaker_id() {
        for order in [[0usize, 1], [1, 0]] {
            let base = [
                utt("c", 2.0, 3.0, "spkB", "how can i help"),
                utt("c", 4.0, 5.0, "spkA", "how can I help?"),
            ];
            let mut utts: Vec<_> = order.iter().map(|&i| base[i].clone()).collect();
            assert_eq!(
                assign_roles(&mut utts, DEFAULT_CUES).csr_speaker.as_deref(),
                Some("spkB")
            );

            let tied = [
                utt("c", 2.0, 3.0, "spkB", "how can i help"),
                utt("c", 2.0, 3.0, "spkA", "How can I help"),
            ];
            let mut utts: Vec<_> = order.iter().map(|&i| tied[i].clone()).collect();
            assert_eq!(
                assign_roles(&mut utts, DEFAULT_CUES).csr_speaker.as_deref(),
                Some("spkA")
            );
        }
    }

    #[test]
    fn cue_must_match_whole_words() {
        let mut utts = vec![utt("c", 0.5, 1.0, "a", "somehow can i helper")];
        assert!(assign_roles(&mut utts, DEFAULT_CUES).low_confidence);
    }

    #[test]
    fn normalization() {
        assert_eq!(normalize_text("  How CAN I, help?!  "), "how can i help");
        assert_eq!(normalize_text("don't"), "dont");
    }
}
