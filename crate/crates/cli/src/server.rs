//! HTTP and WebSocket front end over slate sessions.
//!
//! Each session is owned by one task. Handlers talk to it over a command
//! channel; it publishes [`WireEvent`]s on a broadcast channel. Chains run
//! on the blocking pool and report back to the owner, so snapshots keep
//! flowing while a backend call is outstanding.

use std::collections::{HashMap, VecDeque};
use std::path::PathBuf;
use std::sync::{Arc, Mutex};
use std::time::{Duration, Instant, SystemTime, UNIX_EPOCH};

use axum::extract::ws::{Message, WebSocket, WebSocketUpgrade};
use axum::extract::{Path, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use poetslate_core::analytics::{append_record, SessionRecord, RECORD_SCHEMA_VERSION};
use poetslate_core::chain::{run_chain, ChainError, ChainResult};
use poetslate_core::formats::Frame;
use poetslate_core::session::{SessionConfig, SessionError, Submission};
use poetslate_core::sim::{synthesize_markers, NoiseModel};
use poetslate_core::{ChainSpecs, CompletionBackend, Marker, SlateSession, SlateSnapshot, Vocabulary};
use tokio::sync::{broadcast, mpsc, oneshot};
use tokio::time::MissedTickBehavior;

use crate::wire::{
    ApiErrorBody, EventKind, ResponseView, SnapshotAck, SnapshotBody, StateView, WireEvent, WIRE_SCHEMA_VERSION,
};

pub const DEFAULT_SESSION: &str = "default";
const EVENT_CAPACITY: usize = 256;
const RESPONSE_HISTORY: usize = 64;

/// Everything a session needs besides its own state.
#[derive(Clone)]
pub struct Services {
    pub vocabulary: Arc<Vocabulary>,
    pub backend: Arc<dyn CompletionBackend>,
    pub specs: Arc<ChainSpecs>,
    pub session: SessionConfig,
    pub tick: Duration,
    pub log_path: Option<PathBuf>,
    pub participant: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ApiError {
    BadRequest { code: &'static str, message: String },
    Conflict(String),
    NotFound(String),
    Unavailable,
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let (status, code, message) = match self {
            ApiError::BadRequest { code, message } => (StatusCode::BAD_REQUEST, code, message),
            ApiError::Conflict(m) => (StatusCode::CONFLICT, "session_closed", m),
            ApiError::NotFound(m) => (StatusCode::NOT_FOUND, "not_found", m),
            ApiError::Unavailable => (StatusCode::SERVICE_UNAVAILABLE, "unavailable", "session stopped".into()),
        };
        (status, Json(ApiErrorBody { code: code.into(), message })).into_response()
    }
}

enum Command {
    Snapshot(SnapshotBody, oneshot::Sender<Result<SnapshotAck, ApiError>>),
    State(oneshot::Sender<StateView>),
    Close(oneshot::Sender<()>),
}

/// Cheap to clone; the owning task stops when every handle is gone.
#[derive(Clone)]
pub struct SessionHandle {
    id: String,
    commands: mpsc::Sender<Command>,
    events: broadcast::Sender<WireEvent>,
    responses: Arc<Mutex<VecDeque<WireEvent>>>,
}

impl SessionHandle {
    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn subscribe(&self) -> broadcast::Receiver<WireEvent> {
        self.events.subscribe()
    }

    pub fn latest_response(&self) -> Option<WireEvent> {
        self.responses.lock().unwrap().back().cloned()
    }

    /// Kept responses newer than `seq`, oldest first.
    pub fn responses_after(&self, seq: u64) -> Vec<WireEvent> {
        self.responses.lock().unwrap().iter().filter(|e| e.seq > seq).cloned().collect()
    }

    async fn call<T>(&self, make: impl FnOnce(oneshot::Sender<T>) -> Command) -> Result<T, ApiError> {
        let (tx, rx) = oneshot::channel();
        self.commands.send(make(tx)).await.map_err(|_| ApiError::Unavailable)?;
        rx.await.map_err(|_| ApiError::Unavailable)
    }

    pub async fn snapshot(&self, body: SnapshotBody) -> Result<SnapshotAck, ApiError> {
        self.call(|tx| Command::Snapshot(body, tx)).await?
    }

    pub async fn state(&self) -> Result<StateView, ApiError> {
        self.call(Command::State).await
    }

    pub async fn close(&self) -> Result<(), ApiError> {
        self.call(Command::Close).await
    }
}

struct ChainDone {
    submission: Submission,
    result: Result<ChainResult, ChainError>,
    log_error: Option<String>,
}

struct Owner {
    id: String,
    session: SlateSession,
    services: Services,
    started: Instant,
    seq: u64,
    events: broadcast::Sender<WireEvent>,
    responses: Arc<Mutex<VecDeque<WireEvent>>>,
    latest: Option<ResponseView>,
    done: mpsc::Sender<ChainDone>,
}

impl Owner {
    fn now_ms(&self) -> u64 {
        self.started.elapsed().as_millis() as u64
    }

    fn emit(&mut self, event: EventKind) -> u64 {
        self.seq += 1;
        let ev = WireEvent {
            schema_version: WIRE_SCHEMA_VERSION,
            session_id: self.id.clone(),
            seq: self.seq,
            t_ms: self.now_ms(),
            event,
        };
        if ev.is_response() {
            let mut kept = self.responses.lock().unwrap();
            if kept.len() == RESPONSE_HISTORY {
                kept.pop_front();
            }
            kept.push_back(ev.clone());
        }
        // No subscribers is fine.
        let _ = self.events.send(ev);
        self.seq
    }

    fn markers(&self, body: SnapshotBody) -> Result<Vec<Marker>, ApiError> {
        let bad = |message: String| ApiError::BadRequest { code: "bad_request", message };
        let markers = match (body.poses, body.detections) {
            (Some(poses), None) => synthesize_markers(&poses, &NoiseModel::NONE).map_err(|e| bad(e.to_string()))?,
            (None, Some(detections)) => detections,
            _ => return Err(bad("body needs exactly one of `poses` or `detections`".into())),
        };
        Ok(match body.frame {
            Frame::Logical => markers,
            Frame::Image => markers.iter().map(Marker::flip_y).collect(),
        })
    }

    fn on_snapshot(&mut self, body: SnapshotBody) -> Result<SnapshotAck, ApiError> {
        if self.session.is_closed() {
            return Err(ApiError::Conflict("session is closed".into()));
        }
        let markers = self.markers(body)?;
        let now = self.now_ms();
        let report = self.session.ingest(SlateSnapshot::new(now, markers)).map_err(|e| match e {
            SessionError::UnknownWord(id) => ApiError::BadRequest {
                code: "unknown_word",
                message: format!("unknown word_id `{id}`"),
            },
            SessionError::Closed => ApiError::Conflict("session is closed".into()),
            other => ApiError::BadRequest { code: "bad_snapshot", message: other.to_string() },
        })?;
        let changed = !report.changes.is_empty();
        let remaining = report.settle_deadline.map(|d| d.saturating_sub(now));
        self.emit(EventKind::SnapshotAccepted {
            preview: report.preview.tokens(),
            lines: report.preview.lines.clone(),
            mode: report.mode,
        });
        if let (true, Some(remaining_ms)) = (changed, remaining) {
            self.emit(EventKind::SettleCountdown { remaining_ms });
        }
        Ok(SnapshotAck {
            preview: report.preview.tokens(),
            lines: report.preview.lines,
            mode: report.mode,
            changed,
            settle_remaining_ms: remaining,
        })
    }

    fn state(&self) -> StateView {
        let now = self.now_ms();
        let preview = self.session.preview();
        StateView {
            schema_version: WIRE_SCHEMA_VERSION,
            session_id: self.id.clone(),
            t_ms: now,
            mode: self.session.mode(),
            response: self.latest.clone(),
            preview: preview.tokens(),
            lines: preview.lines.clone(),
            settle_remaining_ms: self.session.settle_deadline().map(|d| d.saturating_sub(now)),
            in_flight: self.session.in_flight(),
            closed: self.session.is_closed(),
            last_seq: self.seq,
        }
    }

    fn on_tick(&mut self) {
        let now = self.now_ms();
        if let Some(submission) = self.session.tick(now) {
            self.start_chain(submission);
        }
    }

    fn start_chain(&mut self, submission: Submission) {
        self.emit(EventKind::Submission {
            poem: submission.poem_text.clone(),
            mode: submission.mode,
        });
        self.emit(EventKind::ChainStarted { mode: submission.mode });
        let services = self.services.clone();
        let done = self.done.clone();
        tokio::task::spawn_blocking(move || {
            let result = run_chain(submission.mode, &submission.poem_text, &*services.backend, &services.specs);
            let log_error = match (&result, &services.log_path) {
                (Ok(r), Some(path)) => {
                    let record = SessionRecord {
                        schema_version: RECORD_SCHEMA_VERSION,
                        timestamp_ms: SystemTime::now()
                            .duration_since(UNIX_EPOCH)
                            .map(|d| d.as_millis() as u64)
                            .unwrap_or(0),
                        participant: services.participant.clone(),
                        mode: r.mode,
                        poem_text: r.poem.clone(),
                        word_ids: submission.word_ids.clone(),
                        stage1_text: r.stage1_text.clone(),
                        stage2_text: r.stage2_text.clone(),
                        total_latency_ms: r.total_latency_ms(),
                    };
                    append_record(path, &record).err().map(|e| e.to_string())
                }
                _ => None,
            };
            let _ = done.blocking_send(ChainDone { submission, result, log_error });
        });
    }

    fn on_chain_done(&mut self, done: ChainDone) {
        match done.result {
            Ok(r) => {
                let seq = self.emit(EventKind::Response {
                    text: r.stage2_text.clone(),
                    poem: r.poem.clone(),
                    mode: r.mode,
                    length_warning: r.length_warning,
                });
                self.latest = Some(ResponseView {
                    text: r.stage2_text,
                    poem: r.poem,
                    mode: r.mode,
                    length_warning: r.length_warning,
                    seq,
                });
            }
            Err(e) => {
                tracing::warn!(session = %self.id, poem = %done.submission.poem_text, error = %e, "chain failed");
                self.emit(EventKind::Error {
                    code: "chain_failed".into(),
                    message: e.to_string(),
                });
            }
        }
        if let Some(message) = done.log_error {
            tracing::error!(session = %self.id, %message, "session log write failed");
            self.emit(EventKind::Error { code: "log_failed".into(), message });
        }
        if let Some(next) = self.session.finish_chain() {
            self.start_chain(next);
        }
    }
}

/// Starts the owning task for a new session.
pub fn spawn_session(id: impl Into<String>, services: Services) -> SessionHandle {
    let id = id.into();
    let (commands, mut command_rx) = mpsc::channel(64);
    let (events, _) = broadcast::channel(EVENT_CAPACITY);
    let responses = Arc::new(Mutex::new(VecDeque::new()));
    let (done, mut done_rx) = mpsc::channel(4);
    let tick = services.tick;
    let mut owner = Owner {
        id: id.clone(),
        session: SlateSession::new(services.vocabulary.clone(), services.session),
        services,
        started: Instant::now(),
        seq: 0,
        events: events.clone(),
        responses: responses.clone(),
        latest: None,
        done,
    };
    tokio::spawn(async move {
        let mut ticker = tokio::time::interval(tick);
        ticker.set_missed_tick_behavior(MissedTickBehavior::Skip);
        loop {
            tokio::select! {
                cmd = command_rx.recv() => match cmd {
                    Some(Command::Snapshot(body, reply)) => {
                        let _ = reply.send(owner.on_snapshot(body));
                    }
                    Some(Command::State(reply)) => {
                        let _ = reply.send(owner.state());
                    }
                    Some(Command::Close(reply)) => {
                        owner.session.close();
                        let _ = reply.send(());
                    }
                    None => break,
                },
                _ = ticker.tick() => owner.on_tick(),
                Some(done) = done_rx.recv() => owner.on_chain_done(done),
            }
        }
    });
    SessionHandle {
        id,
        commands,
        events,
        responses,
    }
}

#[derive(Clone)]
pub struct AppState {
    services: Services,
    sessions: Arc<Mutex<HashMap<String, SessionHandle>>>,
    multi_session: bool,
}

impl AppState {
    /// Must be called inside a Tokio runtime: the default session starts here.
    pub fn new(services: Services, multi_session: bool) -> Self {
        let default = spawn_session(DEFAULT_SESSION, services.clone());
        let sessions = HashMap::from([(DEFAULT_SESSION.to_owned(), default)]);
        Self {
            services,
            sessions: Arc::new(Mutex::new(sessions)),
            multi_session,
        }
    }

    pub fn default_session(&self) -> SessionHandle {
        self.sessions.lock().unwrap()[DEFAULT_SESSION].clone()
    }

    /// Looks up a session, creating it on first use.
    pub fn session(&self, id: &str) -> Result<SessionHandle, ApiError> {
        let valid = !id.is_empty()
            && id.len() <= 64
            && id.chars().all(|c| c.is_ascii_alphanumeric() || c == '-' || c == '_');
        if !valid {
            return Err(ApiError::BadRequest {
                code: "bad_session_id",
                message: "session ids are 1-64 characters of [A-Za-z0-9_-]".into(),
            });
        }
        let mut sessions = self.sessions.lock().unwrap();
        Ok(sessions
            .entry(id.to_owned())
            .or_insert_with(|| spawn_session(id, self.services.clone()))
            .clone())
    }
}

pub fn router(state: AppState) -> Router {
    let mut app = Router::new()
        .route("/health", get(|| async { "ok" }))
        .route("/vocabulary", get(vocabulary))
        .route("/snapshot", post(default_snapshot))
        .route("/state", get(default_state))
        .route("/close", post(default_close))
        .route("/ws", get(default_ws));
    if state.multi_session {
        app = app
            .route("/sessions/{id}/snapshot", post(session_snapshot))
            .route("/sessions/{id}/state", get(session_state))
            .route("/sessions/{id}/close", post(session_close))
            .route("/sessions/{id}/ws", get(session_ws));
    }
    app.with_state(state)
}

async fn vocabulary(State(app): State<AppState>) -> impl IntoResponse {
    Json(app.services.vocabulary.tiles().to_vec())
}

fn parse_snapshot(bytes: &[u8]) -> Result<SnapshotBody, ApiError> {
    serde_json::from_slice(bytes).map_err(|e| ApiError::BadRequest {
        code: "bad_request",
        message: e.to_string(),
    })
}

async fn snapshot(handle: SessionHandle, body: axum::body::Bytes) -> Result<Json<SnapshotAck>, ApiError> {
    Ok(Json(handle.snapshot(parse_snapshot(&body)?).await?))
}

async fn default_snapshot(State(app): State<AppState>, body: axum::body::Bytes) -> Result<Json<SnapshotAck>, ApiError> {
    snapshot(app.default_session(), body).await
}

async fn session_snapshot(
    State(app): State<AppState>,
    Path(id): Path<String>,
    body: axum::body::Bytes,
) -> Result<Json<SnapshotAck>, ApiError> {
    snapshot(app.session(&id)?, body).await
}

async fn default_state(State(app): State<AppState>) -> Result<Json<StateView>, ApiError> {
    Ok(Json(app.default_session().state().await?))
}

async fn session_state(State(app): State<AppState>, Path(id): Path<String>) -> Result<Json<StateView>, ApiError> {
    Ok(Json(app.session(&id)?.state().await?))
}

async fn default_close(State(app): State<AppState>) -> Result<StatusCode, ApiError> {
    app.default_session().close().await?;
    Ok(StatusCode::NO_CONTENT)
}

async fn session_close(State(app): State<AppState>, Path(id): Path<String>) -> Result<StatusCode, ApiError> {
    app.session(&id)?.close().await?;
    Ok(StatusCode::NO_CONTENT)
}

async fn default_ws(State(app): State<AppState>, ws: WebSocketUpgrade) -> Response {
    let handle = app.default_session();
    ws.on_upgrade(move |socket| stream_events(socket, handle))
}

async fn session_ws(State(app): State<AppState>, Path(id): Path<String>, ws: WebSocketUpgrade) -> Response {
    match app.session(&id) {
        Ok(handle) => ws.on_upgrade(move |socket| stream_events(socket, handle)),
        Err(e) => e.into_response(),
    }
}

async fn send(socket: &mut WebSocket, event: &WireEvent) -> bool {
    let text = serde_json::to_string(event).expect("events serialize");
    socket.send(Message::Text(text.into())).await.is_ok()
}

/// Sends the latest response first, then live events. A subscriber that
/// falls behind loses older non-response events but is re-sent every kept
/// response it missed; `seq` never goes backwards on one socket.
async fn stream_events(mut socket: WebSocket, handle: SessionHandle) {
    let mut rx = handle.subscribe();
    let mut last_sent = 0;
    if let Some(latest) = handle.latest_response() {
        if !send(&mut socket, &latest).await {
            return;
        }
        last_sent = latest.seq;
    }
    loop {
        tokio::select! {
            received = rx.recv() => match received {
                Ok(ev) => {
                    if ev.seq > last_sent {
                        if !send(&mut socket, &ev).await {
                            return;
                        }
                        last_sent = ev.seq;
                    }
                }
                Err(broadcast::error::RecvError::Lagged(missed)) => {
                    tracing::debug!(session = %handle.id(), missed, "subscriber lagged");
                    for ev in handle.responses_after(last_sent) {
                        if !send(&mut socket, &ev).await {
                            return;
                        }
                        last_sent = ev.seq;
                    }
                }
                Err(broadcast::error::RecvError::Closed) => return,
            },
            incoming = socket.recv() => match incoming {
                Some(Ok(Message::Close(_))) | Some(Err(_)) | None => return,
                Some(Ok(_)) => {}
            },
        }
    }
}
