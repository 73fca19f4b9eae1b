use std::collections::BTreeSet;
use std::time::Instant;

use callsent_core::corpus::Corpus;
use callsent_core::evaluation::{compare_committees, EvalRecord, ReportRow};
use callsent_core::features::{FeatureConfig, FeatureTable};
use callsent_core::fixtures::{generate_call, split, FixtureSpec};
use callsent_core::fusion::{FusionConfig, FusionStrategy};
use callsent_core::ingest::{segment_call, Audio, SegmentConfig};
use callsent_core::label::{LabelSource, SentimentLabel};
use callsent_core::pipeline::{CommitteeConfig, Committees};
use callsent_core::workflow::featurize_call;
use rayon::prelude::*;

#[test]
fn audio_fusion_recovers_acoustic_only_negatives() {
    let t0 = Instant::now();
    let spec = FixtureSpec {
        seed: 11,
        n_calls: 30,
        min_duration: 200.0,
        max_duration: 240.0,
        acoustic_only_fraction: 0.2,
        text_only_fraction: 0.2,
        escalated_fraction: 0.0,
        test_fraction: 0.4,
        ..FixtureSpec::default()
    };
    let seg_cfg = SegmentConfig::default();
    let calls: Vec<_> = (0..spec.n_calls)
        .into_par_iter()
        .map(|i| {
            let g = generate_call(&spec, i);
            let audio = Audio { samples: g.samples.clone(), sample_rate: g.sample_rate };
            let seg = segment_call(&audio, "a.wav", &g.transcript(), &seg_cfg).unwrap();
            let feats = featurize_call(&audio, &seg.utterances, &FeatureConfig::default(), &seg_cfg.vad);
            (g.plan, seg, feats)
        })
        .collect();
    let (_, test) = split(&spec);
    let test: BTreeSet<String> = test.into_iter().collect();
    let mut corpus = Corpus::new();
    let mut features = FeatureTable::new();
    let mut records = Vec::new();
    let n_utts: usize = calls.iter().map(|c| c.0.utterances.len()).sum();
    for (plan, seg, feats) in &calls {
        corpus.store_call(seg.call.clone(), seg.utterances.clone()).unwrap();
        for (id, fv) in feats {
            if let Ok(fv) = fv {
                features.insert(id.clone(), *fv);
            }
        }
        if !test.contains(&plan.call_id) {
            for u in &plan.utterances {
                corpus.apply_label(&u.utterance_id, SentimentLabel::from(u.truth), LabelSource::SeedHuman).unwrap();
            }
        }
    }
    let committees = Committees::train(&corpus, &features, &CommitteeConfig::default()).unwrap();
    for (plan, _, _) in calls.iter().filter(|c| test.contains(&c.0.call_id)) {
        for u in &plan.utterances {
            let votes = committees.votes(&u.text, features.get(&u.utterance_id));
            records.push(EvalRecord { id: u.utterance_id.clone(), truth: u.truth, votes });
        }
    }
    let fusion = FusionConfig::default();
    let report = compare_committees(&records, &fusion, &ReportRow::all(&fusion));
    println!("{} utterances, {:?}\n{}", n_utts, t0.elapsed(), report.to_table());
    let text = report.line(&ReportRow::Strategy(FusionStrategy::TextOnly).name()).unwrap().metrics.unwrap();
    let fus2 = report.line(&ReportRow::Strategy(FusionStrategy::Fus2).name()).unwrap().metrics.unwrap();
    assert!(fus2.rec_neg - text.rec_neg >= 0.03, "{} vs {}", fus2.rec_neg, text.rec_neg);
    assert!(fus2.accuracy >= text.accuracy - 0.02, "{} vs {}", fus2.accuracy, text.accuracy);
}
