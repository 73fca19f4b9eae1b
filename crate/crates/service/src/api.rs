//! HTTP interface to a corpus: the review queue, label submission, audio
//! playback, pipeline control, and call profiles.
//!
//! Reads are served from an in-memory snapshot of the corpus. Every
//! mutation takes the writer lock, works on a copy, commits it to the store,
//! and only then replaces the snapshot, so readers never see a half-applied
//! change and concurrent writers are serialized.

use std::collections::BTreeMap;
use std::net::SocketAddr;
use std::sync::{Arc, Mutex, RwLock};

use axum::body::Body;
use axum::extract::{Path, State};
use axum::http::{header, HeaderMap, HeaderValue, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use callsent_core::config::ProjectConfig;
use callsent_core::corpus::{CallStatus, Corpus, CorpusStore, PartitionDelta, Role};
use callsent_core::ingest::wav::{read_wav, wav_bytes};
use callsent_core::label::{LabelSource, Polarity, SentimentLabel, Vote};
use callsent_core::pipeline::{ingest_review, run_stored_iteration, IterationReport, QueueStatus, ReviewLabel, Stage};
use callsent_core::scoring::profile_corpus_call;
use callsent_core::Error;

/// Media type of every JSON response body.
pub const MEDIA_TYPE: &str = "application/vnd.callsent.v1+json";

#[derive(Debug, Clone)]
pub struct ApiConfig {
    pub bind: SocketAddr,
    pub token: String,
    pub max_audio_seconds: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunState {
    Idle,
    Running,
    Succeeded,
    Failed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineStatus {
    pub state: RunState,
    pub iteration: u32,
    pub started_at: Option<DateTime<Utc>>,
    pub finished_at: Option<DateTime<Utc>>,
    pub error: Option<String>,
    pub last_report: Option<IterationReport>,
}

pub struct AppState {
    store: CorpusStore,
    config: ProjectConfig,
    api: ApiConfig,
    snapshot: RwLock<Arc<Corpus>>,
    writer: tokio::sync::Mutex<()>,
    status: Mutex<PipelineStatus>,
}

impl AppState {
    /// Loads the corpus; a corrupt store is refused here rather than on the
    /// first request.
    pub fn open(store: CorpusStore, config: ProjectConfig, api: ApiConfig) -> callsent_core::Result<Arc<Self>> {
        config.validate()?;
        if api.token.is_empty() {
            return Err(Error::invalid("an API token is required"));
        }
        let corpus = store.load()?;
        let status = PipelineStatus {
            state: RunState::Idle,
            iteration: corpus.iteration(),
            started_at: None,
            finished_at: None,
            error: None,
            last_report: None,
        };
        Ok(Arc::new(AppState {
            store,
            config,
            api,
            snapshot: RwLock::new(Arc::new(corpus)),
            writer: tokio::sync::Mutex::new(()),
            status: Mutex::new(status),
        }))
    }

    fn corpus(&self) -> Arc<Corpus> {
        self.snapshot.read().expect("snapshot lock").clone()
    }

    fn publish(&self, corpus: Corpus) {
        *self.snapshot.write().expect("snapshot lock") = Arc::new(corpus);
    }

    /// Applies `f` to a copy of the corpus and commits it. Callers hold the
    /// writer lock.
    fn mutate<T>(&self, f: impl FnOnce(&mut Corpus) -> callsent_core::Result<T>) -> callsent_core::Result<T> {
        let mut work = (*self.corpus()).clone();
        let out = f(&mut work)?;
        self.store.commit(&mut work)?;
        self.publish(work);
        Ok(out)
    }
}

pub struct ApiError(StatusCode, String);

impl From<Error> for ApiError {
    fn from(e: Error) -> Self {
        let status = match &e {
            Error::Invalid(_) | Error::Training(_) => StatusCode::UNPROCESSABLE_ENTITY,
            Error::NotFound { .. } => StatusCode::NOT_FOUND,
            Error::Conflict(_) | Error::Aborted(_) => StatusCode::CONFLICT,
            _ => StatusCode::INTERNAL_SERVER_ERROR,
        };
        if status == StatusCode::INTERNAL_SERVER_ERROR {
            log::error!("{e}");
        }
        ApiError(status, e.to_string())
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        versioned(self.0, &serde_json::json!({ "error": self.1 }))
    }
}

type ApiResult = Result<Response, ApiError>;

fn versioned<T: Serialize>(status: StatusCode, body: &T) -> Response {
    let bytes = serde_json::to_vec(body).expect("serializable body");
    let mut resp = (status, bytes).into_response();
    resp.headers_mut()
        .insert(header::CONTENT_TYPE, HeaderValue::from_static(MEDIA_TYPE));
    resp
}

fn ok<T: Serialize>(body: &T) -> ApiResult {
    Ok(versioned(StatusCode::OK, body))
}

fn authorize(state: &AppState, headers: &HeaderMap) -> Result<(), ApiError> {
    let expected = format!("Bearer {}", state.api.token);
    match headers.get(header::AUTHORIZATION).and_then(|v| v.to_str().ok()) {
        Some(v) if v == expected => Ok(()),
        _ => Err(ApiError(StatusCode::UNAUTHORIZED, "missing or wrong bearer token".into())),
    }
}

pub fn router(state: Arc<AppState>) -> Router {
    Router::new()
        .route("/health", get(health))
        .route("/queue", get(queue))
        .route("/calls/{id}", get(call))
        .route("/calls/{id}/utterances", get(utterances))
        .route("/calls/{id}/profile", get(profile))
        .route("/calls/{id}/labels", post(submit_labels))
        .route("/calls/{id}/complete", post(complete))
        .route("/utterances/{id}/audio", get(audio))
        .route("/pipeline/iterate", post(iterate))
        .route("/pipeline/status", get(status))
        .with_state(state)
}

pub async fn serve(state: Arc<AppState>) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(state.api.bind).await?;
    log::info!("listening on {}", listener.local_addr()?);
    axum::serve(listener, router(state))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
}

async fn health(State(state): State<Arc<AppState>>) -> ApiResult {
    let corpus = state.corpus();
    let p = corpus.partition();
    ok(&serde_json::json!({
        "status": "ok",
        "iteration": corpus.iteration(),
        "calls": corpus.calls().count(),
        "labeled": p.labeled_len(),
        "unlabeled": p.unlabeled.len(),
    }))
}

#[derive(Debug, Serialize, Deserialize)]
pub struct QueueEntry {
    pub call_id: String,
    pub status: QueueStatus,
    pub duration_min: f64,
    pub customer_neg_fraction: f64,
    pub csr_neg_fraction: f64,
    pub enqueued_iteration: u32,
    pub utterances: usize,
}

/// Open review items, most negative customer first.
async fn queue(State(state): State<Arc<AppState>>) -> ApiResult {
    let corpus = state.corpus();
    let mut items: Vec<QueueEntry> = corpus
        .review_queue()
        .iter()
        .filter(|q| q.status != QueueStatus::Complete)
        .map(|q| QueueEntry {
            call_id: q.call_id.clone(),
            status: q.status,
            duration_min: q.duration_min,
            customer_neg_fraction: q.customer_neg_fraction,
            csr_neg_fraction: q.csr_neg_fraction,
            enqueued_iteration: q.enqueued_iteration,
            utterances: q.utterances.len(),
        })
        .collect();
    items.sort_by(|a, b| {
        b.customer_neg_fraction
            .total_cmp(&a.customer_neg_fraction)
            .then_with(|| a.call_id.cmp(&b.call_id))
    });
    ok(&items)
}

#[derive(Debug, Serialize, Deserialize)]
pub struct CallView {
    pub call_id: String,
    pub duration: f64,
    pub sample_rate: u32,
    pub status: CallStatus,
    pub role_low_confidence: bool,
    pub utterances: usize,
    pub queue_status: Option<QueueStatus>,
}

async fn call(State(state): State<Arc<AppState>>, Path(id): Path<String>) -> ApiResult {
    let corpus = state.corpus();
    let c = corpus.call(&id)?;
    ok(&CallView {
        call_id: c.call_id.clone(),
        duration: c.duration,
        sample_rate: c.sample_rate,
        status: c.status,
        role_low_confidence: c.role_low_confidence,
        utterances: c.utterances.len(),
        queue_status: corpus.queue_item(&id).map(|q| q.status),
    })
}

#[derive(Debug, Serialize, Deserialize)]
pub struct UtteranceView {
    pub utterance_id: String,
    pub start: f64,
    pub end: f64,
    pub speaker_id: String,
    pub role: Role,
    pub transcript: String,
    pub is_speech: bool,
    pub label: Option<SentimentLabel>,
    pub label_source: Option<LabelSource>,
    /// Fused machine label, when the utterance was predicted.
    pub machine_label: Option<Polarity>,
    pub machine_votes: Option<BTreeMap<String, Vote>>,
}

async fn utterances(State(state): State<Arc<AppState>>, Path(id): Path<String>) -> ApiResult {
    let corpus = state.corpus();
    let fusion = &state.config.pipeline.fusion;
    let views: Vec<UtteranceView> = corpus
        .call_utterances(&id)?
        .into_iter()
        .map(|u| UtteranceView {
            utterance_id: u.utterance_id.clone(),
            start: u.start,
            end: u.end,
            speaker_id: u.speaker_id.clone(),
            role: u.role,
            transcript: u.transcript.clone(),
            is_speech: u.is_speech(),
            label: u.label.map(|l| l.value),
            label_source: u.label.map(|l| l.source),
            machine_label: u.machine_votes.as_ref().and_then(|v| fusion.decide(v).ok()),
            machine_votes: u.machine_votes.clone(),
        })
        .collect();
    ok(&views)
}

async fn profile(State(state): State<Arc<AppState>>, Path(id): Path<String>) -> ApiResult {
    let corpus = state.corpus();
    let fusion = &state.config.pipeline.fusion;
    let predictions: BTreeMap<String, Polarity> = corpus
        .call_utterances(&id)?
        .into_iter()
        .filter_map(|u| Some((u.utterance_id.clone(), fusion.decide(u.machine_votes.as_ref()?).ok()?)))
        .collect();
    ok(&profile_corpus_call(&corpus, &id, &predictions, &state.config.scoring)?)
}

/// WAV bytes of the utterance's audio slice at the call's sample rate.
async fn audio(State(state): State<Arc<AppState>>, Path(id): Path<String>) -> ApiResult {
    let corpus = state.corpus();
    let utt = corpus.utterance(&id)?;
    let span = utt.audio_span();
    if span.duration() > state.api.max_audio_seconds {
        return Err(ApiError(
            StatusCode::PAYLOAD_TOO_LARGE,
            format!("slice is {:.1} s; the limit is {} s", span.duration(), state.api.max_audio_seconds),
        ));
    }
    let path = state.store.audio_path(corpus.call(&utt.call_id)?);
    let bytes = tokio::task::spawn_blocking(move || -> callsent_core::Result<Vec<u8>> {
        let audio = read_wav(&path)?;
        wav_bytes(audio.slice(span), audio.sample_rate)
    })
    .await
    .map_err(|e| ApiError(StatusCode::INTERNAL_SERVER_ERROR, e.to_string()))??;
    Ok(([(header::CONTENT_TYPE, "audio/wav")], Body::from(bytes)).into_response())
}

#[derive(Debug, Serialize, Deserialize)]
pub struct LabelBatch {
    pub labels: Vec<ReviewLabel>,
}

fn delta_body(call_id: &str, delta: &PartitionDelta, corpus: &Corpus) -> serde_json::Value {
    serde_json::json!({
        "call_id": call_id,
        "labeled": delta.labeled,
        "relabeled": delta.relabeled,
        "discarded": delta.discarded,
        "labeled_total": corpus.partition().labeled_len(),
        "unlabeled_total": corpus.partition().unlabeled.len(),
    })
}

/// Applies a reviewed call's labels in one transaction and completes it.
async fn submit_labels(
    State(state): State<Arc<AppState>>,
    Path(id): Path<String>,
    headers: HeaderMap,
    body: Result<Json<LabelBatch>, axum::extract::rejection::JsonRejection>,
) -> ApiResult {
    authorize(&state, &headers)?;
    let Json(batch) = body.map_err(|e| ApiError(StatusCode::UNPROCESSABLE_ENTITY, e.body_text()))?;
    let _guard = state.writer.lock().await;
    let delta = state.mutate(|c| ingest_review(c, &id, &batch.labels))?;
    ok(&delta_body(&id, &delta, &state.corpus()))
}

/// Completes a review without further labels. Completing a call twice is
/// not an error.
async fn complete(State(state): State<Arc<AppState>>, Path(id): Path<String>, headers: HeaderMap) -> ApiResult {
    authorize(&state, &headers)?;
    let _guard = state.writer.lock().await;
    let corpus = state.corpus();
    corpus.call(&id)?;
    let delta = match corpus.queue_item(&id) {
        None => return Err(Error::Conflict(format!("call {id} is not queued for review")).into()),
        Some(_) if corpus.open_queue_item(&id).is_none() => PartitionDelta::default(),
        Some(_) => state.mutate(|c| ingest_review(c, &id, &[]))?,
    };
    ok(&delta_body(&id, &delta, &state.corpus()))
}

/// Starts one loop iteration in the background.
async fn iterate(State(state): State<Arc<AppState>>, headers: HeaderMap) -> ApiResult {
    authorize(&state, &headers)?;
    {
        let mut st = state.status.lock().expect("status lock");
        if st.state == RunState::Running {
            return Err(ApiError(StatusCode::CONFLICT, "an iteration is already running".into()));
        }
        st.state = RunState::Running;
        st.started_at = Some(Utc::now());
        st.finished_at = None;
        st.error = None;
    }
    let bg = state.clone();
    tokio::spawn(async move {
        let guard = bg.writer.lock().await;
        let worker = bg.clone();
        let result = tokio::task::spawn_blocking(move || {
            let report = run_stored_iteration(&worker.store, &worker.config.pipeline, &mut |_: Stage| Ok(()))?;
            let corpus = worker.store.load()?;
            worker.publish(corpus);
            Ok::<_, Error>(report)
        })
        .await;
        drop(guard);
        let mut st = bg.status.lock().expect("status lock");
        st.finished_at = Some(Utc::now());
        st.iteration = bg.corpus().iteration();
        match result {
            Ok(Ok(report)) => {
                st.state = RunState::Succeeded;
                st.last_report = Some(report);
            }
            Ok(Err(e)) => {
                log::warn!("iteration failed: {e}");
                st.state = RunState::Failed;
                st.error = Some(e.to_string());
            }
            Err(e) => {
                st.state = RunState::Failed;
                st.error = Some(e.to_string());
            }
        }
    });
    Ok(versioned(StatusCode::ACCEPTED, &serde_json::json!({ "started": true })))
}

async fn status(State(state): State<Arc<AppState>>) -> ApiResult {
    let st = state.status.lock().expect("status lock").clone();
    ok(&st)
}
