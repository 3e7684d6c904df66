//! HTTP + server-sent-events front end for live and simulated sessions.
//!
//! Every session has one owner: a `tokio::sync::Mutex` around its
//! [`SessionDriver`]. Log lines are appended to `<data_dir>/<id>.jsonl`
//! inside the driver call, so a handler only answers after the line is on
//! disk. Event subscribers read the in-memory copy of the log and then
//! follow a broadcast channel.

use std::collections::{BTreeMap, HashMap};
use std::convert::Infallible;
use std::io;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::{Path as UrlPath, Query as UrlQuery, State};
use axum::http::StatusCode;
use axum::response::sse::{Event, KeepAlive, Sse};
use axum::routing::{get, post};
use axum::{Json, Router};
use chrono::{DateTime, Utc};
use futures::stream::{self, Stream, StreamExt};
use prefgait::gait::GaitTrace;
use prefgait::metrics::{profile_metrics, ProfileMetrics};
use prefgait::oracle::{OracleSpec, SimulatedUser};
use prefgait::preference::{Candidate, PosteriorSummary, Presentation, ResponderKind, Selection};
use prefgait::profile::{interpolate, TorqueCurve, TorqueProfileFeatures};
use prefgait::query::{SessionConfig, SessionPhase};
use prefgait::report::{build_session_report, tested_profiles, SessionReport};
use prefgait::session::{seconds_after, SessionDriver};
use prefgait::session_log::{
    read_log_file, truncate_torn_tail, EventSink, JsonlFile, LogEvent, SessionMode, ValidationMeta,
};
use serde::{Deserialize, Serialize};
use tokio::sync::{broadcast, watch, Mutex, RwLock};
use tokio_stream::wrappers::BroadcastStream;

use crate::config::ServiceConfig;
use crate::error::ApiError;

pub type Clock = Arc<dyn Fn() -> DateTime<Utc> + Send + Sync>;

const BROADCAST_CAPACITY: usize = 1024;

/// Log sink that persists to the JSONL file first, then records the event
/// in memory and fans it out to subscribers.
pub struct ServiceSink {
    file: JsonlFile,
    events: Vec<LogEvent>,
    tx: broadcast::Sender<(usize, LogEvent)>,
}

impl EventSink for ServiceSink {
    fn append(&mut self, event: &LogEvent) -> io::Result<()> {
        self.file.append(event)?;
        self.events.push(event.clone());
        // no receivers is fine
        let _ = self.tx.send((self.events.len() - 1, event.clone()));
        Ok(())
    }
}

struct SessionEntry {
    driver: SessionDriver<ServiceSink>,
    metrics: BTreeMap<usize, ProfileMetrics>,
}

type Shared = Arc<Mutex<SessionEntry>>;

pub struct AppState {
    config: ServiceConfig,
    sessions: RwLock<HashMap<String, Shared>>,
    next_id: AtomicU64,
    clock: Clock,
    shutdown: watch::Receiver<bool>,
}

impl AppState {
    fn now(&self) -> DateTime<Utc> {
        (self.clock)()
    }

    fn log_path(&self, id: &str) -> PathBuf {
        self.config.data_dir.join(format!("{id}.jsonl"))
    }

    fn trace_dir(&self, id: &str) -> PathBuf {
        self.config.data_dir.join("traces").join(id)
    }

    async fn session(&self, id: &str) -> Result<Shared, ApiError> {
        self.sessions
            .read()
            .await
            .get(id)
            .cloned()
            .ok_or_else(|| ApiError::not_found(format!("session '{id}'")))
    }

    /// Reserves a fresh id and creates its log file.
    fn new_log(&self) -> Result<(String, JsonlFile), ApiError> {
        loop {
            let n = self.next_id.fetch_add(1, Ordering::SeqCst);
            let id = format!("session-{n:04}");
            match JsonlFile::create(&self.log_path(&id), self.config.durable) {
                Ok(file) => return Ok((id, file)),
                Err(e) if e.kind() == io::ErrorKind::AlreadyExists => continue,
                Err(e) => return Err(ApiError::internal(format!("cannot create session log: {e}"))),
            }
        }
    }
}

/// Handle returned by [`build`]; drop the sender or send `true` to end
/// open event streams during shutdown.
pub struct Service {
    pub router: Router,
    pub shutdown: watch::Sender<bool>,
    pub recovered: Vec<String>,
}

/// Creates the data directory, restores every session log found there and
/// returns the router.
pub fn build(config: ServiceConfig, clock: Clock) -> io::Result<Service> {
    std::fs::create_dir_all(&config.data_dir)?;
    let (shutdown_tx, shutdown_rx) = watch::channel(false);
    let mut sessions = HashMap::new();
    let mut recovered = Vec::new();
    let mut logs: Vec<PathBuf> = std::fs::read_dir(&config.data_dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "jsonl"))
        .collect();
    logs.sort();
    for path in &logs {
        match recover_session(path, &config, clock()) {
            Ok((id, entry)) => {
                recovered.push(id.clone());
                sessions.insert(id, Arc::new(Mutex::new(entry)));
            }
            Err(e) => tracing::warn!("skipping {}: {e}", path.display()),
        }
    }
    let state = Arc::new(AppState {
        next_id: AtomicU64::new(logs.len() as u64 + 1),
        config,
        sessions: RwLock::new(sessions),
        clock,
        shutdown: shutdown_rx,
    });
    Ok(Service {
        router: router(state),
        shutdown: shutdown_tx,
        recovered,
    })
}

type BoxError = Box<dyn std::error::Error + Send + Sync>;

fn recover_session(path: &Path, config: &ServiceConfig, now: DateTime<Utc>) -> Result<(String, SessionEntry), BoxError> {
    if truncate_torn_tail(path)? {
        tracing::warn!("{}: dropped a torn trailing line", path.display());
    }
    let events = read_log_file(path)?;
    let (tx, _) = broadcast::channel(BROADCAST_CAPACITY);
    let sink = ServiceSink {
        file: JsonlFile::append_to(path, config.durable)?,
        events: events.clone(),
        tx,
    };
    let driver = SessionDriver::recover(&events, sink, now)?;
    let id = driver.id.clone();
    let mut metrics = BTreeMap::new();
    let trace_dir = config.data_dir.join("traces").join(&id);
    for index in 0..driver.state().batch.len() {
        let trace = trace_dir.join(format!("profile_{index}.csv"));
        if trace.is_file() {
            let parsed = GaitTrace::from_csv(std::fs::File::open(&trace)?)?;
            metrics.insert(index, profile_metrics(&parsed, index)?);
        }
    }
    Ok((id, SessionEntry { driver, metrics }))
}

fn router(state: Arc<AppState>) -> Router {
    Router::new()
        .route("/health", get(health))
        .route("/sessions", post(create_session).get(list_sessions))
        .route("/sessions/:id", get(session_status))
        .route("/sessions/:id/query", get(current_query))
        .route("/sessions/:id/choice", post(post_choice))
        .route("/sessions/:id/validation", post(start_validation))
        .route("/sessions/:id/events", get(stream_events))
        .route("/sessions/:id/traces/:profile", post(ingest_trace))
        .route("/sessions/:id/report", get(report))
        .with_state(state)
}

async fn health() -> Json<serde_json::Value> {
    Json(serde_json::json!({ "status": "ok" }))
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct CreateRequest {
    #[serde(default)]
    config: Option<serde_json::Value>,
    #[serde(default = "default_mode")]
    mode: SessionMode,
    #[serde(default)]
    oracle: Option<OracleSpec>,
}

fn default_mode() -> SessionMode {
    SessionMode::Live
}

/// Overlays the request's top-level config keys on the service defaults.
fn merge_config(defaults: &SessionConfig, overrides: Option<serde_json::Value>) -> Result<SessionConfig, ApiError> {
    let mut base = serde_json::to_value(defaults).expect("config serializes");
    match overrides {
        None | Some(serde_json::Value::Null) => {}
        Some(serde_json::Value::Object(map)) => {
            base.as_object_mut().expect("config is an object").extend(map);
        }
        Some(_) => return Err(ApiError::bad_request("config must be a JSON object")),
    }
    serde_json::from_value(base).map_err(|e| ApiError::bad_request(format!("invalid session config: {e}")))
}

#[derive(Debug, Serialize)]
struct SessionStatus {
    session_id: String,
    mode: SessionMode,
    phase: SessionPhase,
    iteration: usize,
    comparisons: usize,
    finished: bool,
    summary: PosteriorSummary,
    final_index: Option<usize>,
    final_profile: Option<TorqueProfileFeatures>,
    events: usize,
    /// Outcome of the validation answer just submitted, if it was one.
    #[serde(skip_serializing_if = "Option::is_none")]
    kept: Option<bool>,
}

fn status(entry: &SessionEntry, kept: Option<bool>) -> SessionStatus {
    let d = &entry.driver;
    let s = d.state();
    SessionStatus {
        session_id: d.id.clone(),
        mode: d.mode,
        phase: s.phase,
        iteration: s.iteration(),
        comparisons: s.config.comparisons,
        finished: matches!(s.phase, SessionPhase::Finished | SessionPhase::Validating),
        summary: s.summary(),
        final_index: s.final_index,
        final_profile: s.final_profile().copied(),
        events: d.events_written(),
        kept,
    }
}

async fn create_session(
    State(app): State<Arc<AppState>>,
    body: Bytes,
) -> Result<(StatusCode, Json<SessionStatus>), ApiError> {
    let request: CreateRequest = if body.iter().all(u8::is_ascii_whitespace) {
        CreateRequest {
            config: None,
            mode: SessionMode::Live,
            oracle: None,
        }
    } else {
        serde_json::from_slice(&body).map_err(ApiError::json)?
    };
    let config = merge_config(&app.config.session_defaults, request.config)?;
    config.validate()?;
    let (id, file) = app.new_log()?;
    let (tx, _) = broadcast::channel(BROADCAST_CAPACITY);
    let sink = ServiceSink {
        file,
        events: Vec::new(),
        tx,
    };
    let clock = app.clock.clone();
    let mode = request.mode;
    let oracle = request.oracle;
    let log_path = app.log_path(&id);
    let session_id = id.clone();
    let built = tokio::task::spawn_blocking(move || {
        let user = match (&oracle, mode) {
            (Some(spec), SessionMode::Simulated) => {
                Some(SimulatedUser::for_session(spec, config.ranges.clone(), config.seed)?)
            }
            _ => None,
        };
        let mut driver = SessionDriver::create(session_id, config, mode, oracle, sink, clock())?;
        if let Some(mut user) = user {
            driver.run_to_completion(&mut user, || clock())?;
        }
        Ok::<_, prefgait::session::SessionError>(driver)
    })
    .await
    .map_err(|e| ApiError::internal(e.to_string()))?;
    let driver = match built {
        Ok(d) => d,
        Err(e) => {
            // the log never became a valid session
            let _ = std::fs::remove_file(&log_path);
            return Err(e.into());
        }
    };
    tracing::info!(session = %id, ?mode, "session created");
    let entry = SessionEntry {
        driver,
        metrics: BTreeMap::new(),
    };
    let body = status(&entry, None);
    app.sessions.write().await.insert(id, Arc::new(Mutex::new(entry)));
    Ok((StatusCode::CREATED, Json(body)))
}

async fn list_sessions(State(app): State<Arc<AppState>>) -> Json<Vec<String>> {
    let mut ids: Vec<String> = app.sessions.read().await.keys().cloned().collect();
    ids.sort();
    Json(ids)
}

async fn session_status(
    State(app): State<Arc<AppState>>,
    UrlPath(id): UrlPath<String>,
) -> Result<Json<SessionStatus>, ApiError> {
    let session = app.session(&id).await?;
    let entry = session.lock().await;
    Ok(Json(status(&entry, None)))
}

#[derive(Debug, Serialize)]
struct OptionView {
    index: Option<usize>,
    features: TorqueProfileFeatures,
    curve: TorqueCurve,
}

#[derive(Debug, Serialize)]
struct Timing {
    exposure_s: f64,
    washout_s: f64,
    answer_delay_s: f64,
    presented_at: DateTime<Utc>,
    answer_after: DateTime<Utc>,
    remaining_s: f64,
}

#[derive(Debug, Serialize)]
struct QueryView {
    session_id: String,
    iteration: usize,
    comparisons: usize,
    presentation: Presentation,
    a: OptionView,
    b: OptionView,
    timing: Timing,
    validation: Option<ValidationMeta>,
}

fn option_view(c: &Candidate, config: &SessionConfig) -> Result<OptionView, ApiError> {
    let curve = interpolate(&c.features, &config.ranges, config.resolution)
        .map_err(|e| ApiError::internal(e.to_string()))?;
    Ok(OptionView {
        index: c.index,
        features: c.features,
        curve,
    })
}

async fn current_query(
    State(app): State<Arc<AppState>>,
    UrlPath(id): UrlPath<String>,
) -> Result<Json<QueryView>, ApiError> {
    let session = app.session(&id).await?;
    let entry = session.lock().await;
    let d = &entry.driver;
    let s = d.state();
    let pending = d
        .pending()
        .ok_or_else(|| ApiError::conflict(format!("no query is awaiting an answer (state {})", s.phase), s.phase))?;
    let validation = pending.validation.map(|index| {
        let v = &s.validation.as_ref().expect("validating").queries[index];
        ValidationMeta {
            index,
            target: v.target,
            sign: v.sign,
            preferred_slot: v.preferred_slot,
        }
    });
    let delay = s.config.answer_delay_s();
    let remaining = if d.mode == SessionMode::Live {
        d.remaining_lockout_s(app.now())
    } else {
        0.0
    };
    Ok(Json(QueryView {
        session_id: id,
        iteration: s.iteration(),
        comparisons: s.config.comparisons,
        presentation: pending.query.presentation,
        a: option_view(&pending.query.a, &s.config)?,
        b: option_view(&pending.query.b, &s.config)?,
        timing: Timing {
            exposure_s: s.config.exposure_s,
            washout_s: s.config.washout_s,
            answer_delay_s: delay,
            presented_at: pending.presented_at,
            answer_after: seconds_after(pending.presented_at, delay),
            remaining_s: remaining,
        },
        validation,
    }))
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ChoiceRequest {
    selected: Selection,
}

async fn post_choice(
    State(app): State<Arc<AppState>>,
    UrlPath(id): UrlPath<String>,
    body: Bytes,
) -> Result<Json<SessionStatus>, ApiError> {
    let request: ChoiceRequest = serde_json::from_slice(&body).map_err(ApiError::json)?;
    let session = app.session(&id).await?;
    let mut entry = session.lock().await;
    let was_validating = entry.driver.state().phase == SessionPhase::Validating;
    let before = entry
        .driver
        .state()
        .validation
        .as_ref()
        .map_or(0, |r| r.outcomes.len());
    let now = app.now();
    // returns only after the choice line is appended (and synced when durable)
    entry.driver.submit(request.selected, ResponderKind::Human, now)?;
    let kept = if was_validating {
        entry
            .driver
            .state()
            .validation
            .as_ref()
            .and_then(|r| r.outcomes.get(before)).copied()
    } else {
        None
    };
    Ok(Json(status(&entry, kept)))
}

async fn start_validation(
    State(app): State<Arc<AppState>>,
    UrlPath(id): UrlPath<String>,
) -> Result<Json<SessionStatus>, ApiError> {
    let session = app.session(&id).await?;
    let mut entry = session.lock().await;
    let now = app.now();
    entry.driver.start_validation(now)?;
    Ok(Json(status(&entry, None)))
}

#[derive(Debug, Deserialize)]
struct EventsQuery {
    #[serde(default)]
    offset: usize,
}

fn sse_event(index: usize, event: &LogEvent) -> Event {
    let kind = serde_json::to_value(event.event)
        .ok()
        .and_then(|v| v.as_str().map(str::to_owned))
        .unwrap_or_default();
    Event::default().id(index.to_string()).event(kind).data(event.to_line())
}

async fn stream_events(
    State(app): State<Arc<AppState>>,
    UrlPath(id): UrlPath<String>,
    UrlQuery(q): UrlQuery<EventsQuery>,
) -> Result<Sse<impl Stream<Item = Result<Event, Infallible>>>, ApiError> {
    let session = app.session(&id).await?;
    let (history, rx, next) = {
        // subscribing under the lock means nothing lands between the
        // history snapshot and the live tail
        let entry = session.lock().await;
        let events = &entry.driver.sink().events;
        let start = q.offset.min(events.len());
        let history: Vec<Event> = events[start..]
            .iter()
            .enumerate()
            .map(|(i, e)| sse_event(start + i, e))
            .collect();
        (history, entry.driver.sink().tx.subscribe(), events.len().max(q.offset))
    };
    let live = BroadcastStream::new(rx)
        .take_while(|item| std::future::ready(item.is_ok()))
        .filter_map(move |item| {
            std::future::ready(match item {
                Ok((index, event)) if index >= next => Some(sse_event(index, &event)),
                _ => None,
            })
        });
    let mut shutdown = app.shutdown.clone();
    let stream = stream::iter(history)
        .chain(live)
        .map(Ok)
        .take_until(async move {
            let _ = shutdown.wait_for(|stop| *stop).await;
        });
    Ok(Sse::new(stream).keep_alive(KeepAlive::default()))
}

#[derive(Debug, Serialize)]
struct TraceResult {
    session_id: String,
    replaced: bool,
    metrics: ProfileMetrics,
}

async fn ingest_trace(
    State(app): State<Arc<AppState>>,
    UrlPath((id, profile)): UrlPath<(String, usize)>,
    body: Bytes,
) -> Result<Json<TraceResult>, ApiError> {
    let session = app.session(&id).await?;
    let batch_len = session.lock().await.driver.state().batch.len();
    if profile >= batch_len {
        return Err(ApiError::not_found(format!(
            "profile {profile} (batch has {batch_len} profiles)"
        )));
    }
    let metrics = tokio::task::spawn_blocking(move || {
        let trace = GaitTrace::from_csv(body.as_ref())?;
        let metrics = profile_metrics(&trace, profile).map_err(|e| match e {
            prefgait::metrics::MetricsError::Gait(g) => ApiError::from(g),
            other => ApiError::unprocessable("invalid_trace", other.to_string()),
        })?;
        Ok::<_, ApiError>((metrics, body))
    })
    .await
    .map_err(|e| ApiError::internal(e.to_string()))?;
    let (metrics, body) = metrics?;

    let dir = app.trace_dir(&id);
    let mut entry = session.lock().await;
    std::fs::create_dir_all(&dir).map_err(|e| ApiError::internal(e.to_string()))?;
    std::fs::write(dir.join(format!("profile_{profile}.csv")), &body)
        .map_err(|e| ApiError::internal(e.to_string()))?;
    let replaced = entry.metrics.insert(profile, metrics.clone()).is_some();
    if replaced {
        tracing::info!(session = %id, profile, "trace re-ingested, previous metrics replaced");
    }
    Ok(Json(TraceResult {
        session_id: id,
        replaced,
        metrics,
    }))
}

#[derive(Debug, Serialize)]
struct ReportView {
    phase: SessionPhase,
    report: SessionReport,
    trajectory: Vec<PosteriorSummary>,
}

async fn report(
    State(app): State<Arc<AppState>>,
    UrlPath(id): UrlPath<String>,
) -> Result<Json<ReportView>, ApiError> {
    let session = app.session(&id).await?;
    let entry = session.lock().await;
    let s = entry.driver.state();
    let omissions = tested_profiles(s)
        .into_iter()
        .filter(|i| !entry.metrics.contains_key(i))
        .map(|i| format!("profile {i}: no trace"))
        .collect();
    let metrics = entry.metrics.values().cloned().collect();
    Ok(Json(ReportView {
        phase: s.phase,
        report: build_session_report(id.clone(), id, s, metrics, omissions),
        trajectory: s.trajectory.clone(),
    }))
}
