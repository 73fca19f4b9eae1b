#![allow(dead_code)]

use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::OnceLock;

use callsent_core::config::ProjectConfig;
use callsent_core::corpus::CorpusStore;
use callsent_core::fixtures::{generate, FixtureManifest, FixtureSpec};
use callsent_core::pipeline::{run_stored_iteration, Stage};
use callsent_core::workflow::{featurize_corpus, ingest_dir, read_truth, seed_from_truth, segment_ingested};

pub struct Template {
    pub dir: tempfile::TempDir,
    pub fixture: tempfile::TempDir,
    pub manifest: FixtureManifest,
}

pub fn config() -> ProjectConfig {
    let mut c = ProjectConfig { mfcc: None, ..ProjectConfig::default() };
    c.pipeline.loop_config.min_seed_labels = 60;
    c
}

pub fn spec() -> FixtureSpec {
    FixtureSpec {
        seed: 5,
        n_calls: 8,
        min_duration: 40.0,
        max_duration: 60.0,
        escalated_fraction: 0.25,
        hold_seconds: 560.0,
        test_fraction: 0.25,
        ..FixtureSpec::default()
    }
}

/// A segmented, featurized, seeded corpus after one iteration.
pub fn template() -> &'static Template {
    static T: OnceLock<Template> = OnceLock::new();
    T.get_or_init(|| {
        let fixture = tempfile::tempdir().unwrap();
        let manifest = generate(&spec(), fixture.path()).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let store = CorpusStore::init(dir.path()).unwrap();
        let cfg = config();
        ingest_dir(&store, fixture.path()).unwrap();
        segment_ingested(&store, &cfg.segment).unwrap();
        featurize_corpus(&store, &cfg.features, &cfg.segment.vad, None).unwrap();
        let truth = read_truth(&fixture.path().join("truth.jsonl")).unwrap();
        let seeds: BTreeSet<String> = manifest.seed_calls.iter().cloned().collect();
        seed_from_truth(&store, &truth, Some(&seeds), 60).unwrap();
        let report = run_stored_iteration(&store, &cfg.pipeline, &mut |_: Stage| Ok(())).unwrap();
        assert!(!report.flagged_calls.is_empty(), "fixture should flag a call");
        Template { dir, fixture, manifest }
    })
}

fn copy_dir(from: &Path, to: &Path) {
    fs::create_dir_all(to).unwrap();
    for entry in fs::read_dir(from).unwrap() {
        let entry = entry.unwrap();
        let target = to.join(entry.file_name());
        if entry.file_type().unwrap().is_dir() {
            copy_dir(&entry.path(), &target);
        } else {
            fs::copy(entry.path(), target).unwrap();
        }
    }
}

/// A private copy of the template corpus.
pub fn fresh_corpus() -> (tempfile::TempDir, PathBuf) {
    let t = template();
    let dir = tempfile::tempdir().unwrap();
    let root = dir.path().join("corpus");
    copy_dir(t.dir.path(), &root);
    (dir, root)
}
