//! Command-line verbs. Each is a thin wrapper over a core operation.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Parser, Subcommand};
use serde::{Deserialize, Serialize};

use callsent_core::config::ProjectConfig;
use callsent_core::corpus::log::read_chat_file;
use callsent_core::corpus::store::write_atomic;
use callsent_core::corpus::CorpusStore;
use callsent_core::features::read_feature_table;
use callsent_core::fixtures::{generate, FixtureManifest, FixtureSpec};
use callsent_core::fusion::FusionStrategy;
use callsent_core::label::{Polarity, Vote};
use callsent_core::pipeline::{ingest_review, run_stored_iteration, Committees, ReviewLabel, Stage};
use callsent_core::scoring::{profiles_to_csv, profiles_to_svg};
use callsent_core::workflow;

use crate::api::{self, ApiConfig, AppState};

#[derive(Debug, Parser)]
#[command(name = "callsent", version, about = "Sentiment annotation and scoring for service-call recordings")]
pub struct Cli {
    /// Corpus root directory.
    #[arg(long, env = "CALLSENT_CORPUS", default_value = ".", global = true)]
    pub corpus: PathBuf,
    /// Project configuration (JSON). Defaults to `<corpus>/config.json`
    /// when present, else built-in defaults.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write a synthetic fixture corpus.
    GenFixtures {
        out: PathBuf,
        /// Fixture spec (JSON); flags below override it.
        #[arg(long)]
        spec: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        calls: Option<usize>,
    },
    /// Copy `audio/*.wav` and `transcripts/*.json` from a directory into the corpus.
    Ingest { src: PathBuf },
    /// Segment ingested calls into utterances.
    Segment,
    /// Compute acoustic features (and MFCCs when configured).
    Featurize,
    /// Apply seed labels from a label log.
    SeedLabel {
        #[arg(long)]
        truth: PathBuf,
        /// Restrict to the seed calls listed in a fixture manifest.
        #[arg(long)]
        manifest: Option<PathBuf>,
        /// Restrict to these calls (comma separated).
        #[arg(long, value_delimiter = ',')]
        calls: Vec<String>,
        #[arg(long, default_value_t = 200)]
        min: usize,
    },
    /// Import labeled chat transcripts as extra text training data.
    ImportChat { file: PathBuf },
    /// Train both committees on the current labels and save them.
    Train,
    /// Committee votes for every unlabeled utterance.
    Predict {
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Fuse stored votes with one strategy.
    Fuse {
        #[arg(long)]
        strategy: Option<FusionStrategy>,
        /// Votes written by `predict`.
        #[arg(long)]
        votes: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run annotation-loop iterations.
    Iterate {
        #[arg(long, default_value_t = 1)]
        times: usize,
    },
    /// Submit a reviewed call's labels (JSON list of {utterance_id, label}).
    Review { call_id: String, labels: PathBuf },
    /// Compare members and fusion strategies on held-out calls.
    Evaluate {
        #[arg(long)]
        truth: PathBuf,
        /// Evaluate on the test calls of a fixture manifest.
        #[arg(long)]
        manifest: Option<PathBuf>,
        #[arg(long, value_delimiter = ',')]
        calls: Vec<String>,
    },
    /// Negative scores and cumulative curves per call.
    Score {
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the HTTP service.
    Serve {
        #[arg(long, default_value = "127.0.0.1:8080")]
        bind: std::net::SocketAddr,
        #[arg(long, env = "CALLSENT_TOKEN", hide_env_values = true)]
        token: String,
        #[arg(long, default_value_t = 30.0)]
        max_audio_seconds: f64,
    },
}

/// Exit status for an error: 1 for bad input, 2 for everything else.
pub fn exit_code(err: &anyhow::Error) -> u8 {
    match err.downcast_ref::<callsent_core::Error>() {
        Some(e) if e.is_validation() => 1,
        _ => 2,
    }
}

pub fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn load_config(cli: &Cli) -> anyhow::Result<ProjectConfig> {
    let path = cli.config.clone().or_else(|| {
        let p = cli.corpus.join("config.json");
        p.exists().then_some(p)
    });
    Ok(match path {
        Some(p) => ProjectConfig::load(&p)?,
        None => ProjectConfig::default(),
    })
}

fn print_json<T: Serialize>(value: &T) -> anyhow::Result<()> {
    println!("{}", serde_json::to_string_pretty(value)?);
    Ok(())
}

fn ensure_dir(path: &Path) -> anyhow::Result<()> {
    fs::create_dir_all(path).with_context(|| format!("creating {}", path.display()))
}

/// One row per predicted utterance, as written by `predict`.
#[derive(Debug, Serialize, Deserialize)]
pub struct PredictionRecord {
    pub utterance_id: String,
    pub call_id: String,
    pub votes: BTreeMap<String, Vote>,
    pub fused: Option<Polarity>,
}

fn predictions_path(store: &CorpusStore) -> PathBuf {
    store.reports_dir().join("predictions.json")
}

fn call_set(manifest: Option<&Path>, calls: &[String], pick: fn(FixtureManifest) -> Vec<String>) -> anyhow::Result<Option<BTreeSet<String>>> {
    let mut set: BTreeSet<String> = calls.iter().cloned().collect();
    if let Some(m) = manifest {
        set.extend(pick(FixtureManifest::read(m)?));
    }
    Ok((!set.is_empty()).then_some(set))
}

pub fn run(cli: Cli) -> anyhow::Result<()> {
    let config = load_config(&cli)?;
    match cli.command {
        Command::GenFixtures { out, spec, seed, calls } => {
            let mut fs_spec = match spec {
                Some(p) => serde_json::from_slice(&fs::read(&p).with_context(|| format!("reading {}", p.display()))?)?,
                None => FixtureSpec::default(),
            };
            if let Some(s) = seed {
                fs_spec.seed = s;
            }
            if let Some(n) = calls {
                fs_spec.n_calls = n;
            }
            let manifest = generate(&fs_spec, &out)?;
            print_json(&serde_json::json!({
                "calls": manifest.calls.len(),
                "utterances": manifest.utterances().count(),
                "train_calls": manifest.train_calls.len(),
                "test_calls": manifest.test_calls.len(),
            }))
        }
        Command::Ingest { src } => {
            let store = CorpusStore::init(&cli.corpus)?;
            let copied = workflow::ingest_dir(&store, &src)?;
            print_json(&serde_json::json!({ "ingested": copied }))
        }
        Command::Segment => {
            let store = CorpusStore::open(&cli.corpus)?;
            print_json(&workflow::segment_ingested(&store, &config.segment)?)
        }
        Command::Featurize => {
            let store = CorpusStore::open(&cli.corpus)?;
            let report =
                workflow::featurize_corpus(&store, &config.features, &config.segment.vad, config.mfcc.as_ref())?;
            print_json(&report)
        }
        Command::SeedLabel { truth, manifest, calls, min } => {
            let store = CorpusStore::open(&cli.corpus)?;
            let labels = workflow::read_truth(&truth)?;
            let set = call_set(manifest.as_deref(), &calls, |m| m.seed_calls)?;
            let n = workflow::seed_from_truth(&store, &labels, set.as_ref(), min)?;
            print_json(&serde_json::json!({ "seeded": n }))
        }
        Command::ImportChat { file } => {
            let store = CorpusStore::open(&cli.corpus)?;
            let mut corpus = store.load()?;
            let report = corpus.import_chat(read_chat_file(&file)?);
            store.commit(&mut corpus)?;
            print_json(&report)
        }
        Command::Train => {
            let store = CorpusStore::open(&cli.corpus)?;
            let features = read_feature_table(&store.features_path())?;
            let committees = Committees::train(&store.load()?, &features, &config.pipeline.committee)?;
            committees.save(&store.models_dir())?;
            print_json(&serde_json::json!({
                "text_training_size": committees.models.text_training_size,
                "audio_training_size": committees.models.audio_training_size,
                "members": committees.active,
            }))
        }
        Command::Predict { out } => {
            let store = CorpusStore::open(&cli.corpus)?;
            let corpus = store.load()?;
            let features = read_feature_table(&store.features_path())?;
            let committees = Committees::load(&store.models_dir(), &config.pipeline.committee)
                .context("no trained models; run `train` first")?;
            let records: Vec<PredictionRecord> = corpus
                .unlabeled_items()
                .into_iter()
                .map(|u| {
                    let votes = committees.votes(&u.transcript, features.get(&u.utterance_id));
                    let fused = config.pipeline.fusion.decide(&votes).ok();
                    PredictionRecord {
                        utterance_id: u.utterance_id.clone(),
                        call_id: u.call_id.clone(),
                        votes,
                        fused,
                    }
                })
                .collect();
            let path = out.unwrap_or_else(|| predictions_path(&store));
            if let Some(dir) = path.parent() {
                ensure_dir(dir)?;
            }
            write_atomic(&path, &serde_json::to_vec_pretty(&records)?)?;
            let negative = records.iter().filter(|r| r.fused == Some(Polarity::Negative)).count();
            print_json(&serde_json::json!({ "predicted": records.len(), "negative": negative, "out": path }))
        }
        Command::Fuse { strategy, votes, out } => {
            let store = CorpusStore::open(&cli.corpus)?;
            let path = votes.unwrap_or_else(|| predictions_path(&store));
            let records: Vec<PredictionRecord> =
                serde_json::from_slice(&fs::read(&path).with_context(|| format!("reading {}", path.display()))?)?;
            let mut fusion = config.pipeline.fusion.clone();
            if let Some(s) = strategy {
                fusion.strategy = s;
            }
            let mut csv = String::from("utterance_id,call_id,label\n");
            for r in &records {
                let label = fusion.decide(&r.votes).map(|p| p.as_str()).unwrap_or("undecided");
                csv.push_str(&format!("{},{},{}\n", r.utterance_id, r.call_id, label));
            }
            match out {
                Some(p) => write_atomic(&p, csv.as_bytes())?,
                None => print!("{csv}"),
            }
            Ok(())
        }
        Command::Iterate { times } => {
            let store = CorpusStore::open(&cli.corpus)?;
            for _ in 0..times {
                let report = run_stored_iteration(&store, &config.pipeline, &mut |_: Stage| Ok(()))?;
                print_json(&serde_json::json!({
                    "iteration": report.iteration,
                    "predicted": report.predicted,
                    "flagged_calls": report.flagged_calls,
                    "auto_accepted": report.auto_accepted,
                    "labeled_after": report.labeled_after,
                    "remaining": report.remaining,
                    "quiescent": report.quiescent,
                }))?;
                if report.quiescent {
                    break;
                }
            }
            Ok(())
        }
        Command::Review { call_id, labels } => {
            let store = CorpusStore::open(&cli.corpus)?;
            let batch: Vec<ReviewLabel> = serde_json::from_slice(
                &fs::read(&labels).with_context(|| format!("reading {}", labels.display()))?,
            )
            .map_err(|e| callsent_core::Error::invalid(format!("{}: {e}", labels.display())))?;
            let mut corpus = store.load()?;
            let delta = ingest_review(&mut corpus, &call_id, &batch)?;
            store.commit(&mut corpus)?;
            print_json(&delta)
        }
        Command::Evaluate { truth, manifest, calls } => {
            let store = CorpusStore::open(&cli.corpus)?;
            let labels = workflow::read_truth(&truth)?;
            let set = call_set(manifest.as_deref(), &calls, |m| m.test_calls)?
                .ok_or_else(|| callsent_core::Error::invalid("name the evaluation calls with --calls or --manifest"))?;
            let report =
                workflow::evaluate_store(&store, &config.pipeline.committee, &config.pipeline.fusion, &labels, &set)?;
            let dir = store.reports_dir();
            ensure_dir(&dir)?;
            write_atomic(&dir.join("evaluation.csv"), report.to_csv()?.as_bytes())?;
            print!("{}", report.to_table());
            Ok(())
        }
        Command::Score { out } => {
            let store = CorpusStore::open(&cli.corpus)?;
            let profiles = workflow::score_store(&store, &config.pipeline.fusion, &config.scoring)?;
            let dir = out.unwrap_or_else(|| store.reports_dir());
            ensure_dir(&dir)?;
            write_atomic(&dir.join("scores.csv"), profiles_to_csv(&profiles)?.as_bytes())?;
            write_atomic(&dir.join("scores.svg"), profiles_to_svg(&profiles).as_bytes())?;
            let summary: Vec<_> = profiles
                .iter()
                .map(|p| {
                    serde_json::json!({
                        "call_id": p.call_id,
                        "customer": p.customer.as_ref().map(|r| r.negative_score),
                        "csr": p.csr.as_ref().map(|r| r.negative_score),
                    })
                })
                .collect();
            print_json(&summary)
        }
        Command::Serve { bind, token, max_audio_seconds } => {
            let store = CorpusStore::open(&cli.corpus)?;
            let state = AppState::open(store, config, ApiConfig { bind, token, max_audio_seconds })?;
            let rt = tokio::runtime::Builder::new_multi_thread().enable_all().build()?;
            rt.block_on(api::serve(state))?;
            Ok(())
        }
    }
}
