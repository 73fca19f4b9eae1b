//! Small synthetic corpora with separable text and audio.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{LoopConfig, PipelineConfig};
use crate::corpus::tests::{call_with, utt};
use crate::corpus::{Corpus, Role};
use crate::features::{FeatureTable, FeatureVector39, N_FEATURES};
use crate::label::{LabelSource, SentimentLabel};

const NEGATIVE: [&str; 4] = [
    "your service is the worst",
    "this is terrible and i am angry",
    "awful experience i hate this",
    "the worst bank ever so angry",
];
const NEUTRAL: [&str; 4] = [
    "thank you for calling how can i help",
    "my account number is one two three",
    "sure let me check that for you",
    "good thanks that works for me",
];

pub struct Synthetic {
    pub corpus: Corpus,
    pub features: FeatureTable,
    /// (utterance id, is negative) for every utterance.
    pub truth: Vec<(String, bool)>,
}

fn row(rng: &mut ChaCha8Rng, negative: bool) -> FeatureVector39 {
    let mut v = [0.0; N_FEATURES];
    for (j, x) in v.iter_mut().enumerate() {
        let shift = if negative && j % 3 == 0 { 3.0 } else { 0.0 };
        *x = shift + rng.random::<f64>();
    }
    FeatureVector39(v)
}

/// Adds one call of `n` alternating CSR/customer utterances, 5 s each.
/// `negative(i)` decides the polarity of utterance `i`.
pub fn add_call(
    s: &mut Synthetic,
    rng: &mut ChaCha8Rng,
    call_id: &str,
    duration: f64,
    n: usize,
    negative: impl Fn(usize) -> bool,
) -> Vec<String> {
    let step = duration / n as f64;
    let utts: Vec<_> = (0..n)
        .map(|i| {
            let neg = negative(i);
            let text = if neg { NEGATIVE[i % 4] } else { NEUTRAL[i % 4] };
            let start = i as f64 * step + 0.5;
            let mut u = utt(call_id, start, start + 5.0, if i % 2 == 0 { "a" } else { "b" }, text);
            u.role = if i % 2 == 0 { Role::Csr } else { Role::Customer };
            s.features.insert(u.utterance_id.clone(), row(rng, neg));
            s.truth.push((u.utterance_id.clone(), neg));
            u
        })
        .collect();
    let mut call = call_with(call_id, &utts);
    call.duration = duration;
    s.corpus.store_call(call, utts.clone()).unwrap();
    utts.into_iter().map(|u| u.utterance_id).collect()
}

/// Six seeded calls (60 labels), five short unlabeled calls with a few
/// negatives, and one long unlabeled call full of customer complaints.
pub fn synthetic() -> Synthetic {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut s = Synthetic {
        corpus: Corpus::new(),
        features: FeatureTable::new(),
        truth: Vec::new(),
    };
    for c in 0..6 {
        let ids = add_call(&mut s, &mut rng, &format!("seed{c}"), 60.0, 10, |i| (i + c) % 3 == 0);
        for id in ids {
            let neg = s.truth.iter().find(|(t, _)| *t == id).unwrap().1;
            let label = if neg { SentimentLabel::Negative } else { SentimentLabel::Nonnegative };
            s.corpus.apply_label(&id, label, LabelSource::SeedHuman).unwrap();
        }
    }
    for c in 0..5 {
        add_call(&mut s, &mut rng, &format!("short{c}"), 60.0, 10, |i| i == 3);
    }
    add_call(&mut s, &mut rng, "long", 720.0, 12, |i| i % 2 == 1);
    s
}

pub fn config() -> PipelineConfig {
    PipelineConfig {
        loop_config: LoopConfig {
            min_seed_labels: 50,
            ..LoopConfig::default()
        },
        ..PipelineConfig::default()
    }
}
