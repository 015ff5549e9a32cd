//! HTTP parameter-tuning service.
//!
//! All paths live under `/v1`; bodies are JSON. Session ids are decimal.
//!
//! | verb   | path                                | body            | reply            |
//! |--------|-------------------------------------|-----------------|------------------|
//! | GET    | /v1/health                          |                 | `{"status":"ok"}`|
//! | GET    | /v1/sessions                        |                 | `{"sessions":[id]}` |
//! | POST   | /v1/sessions                        | [`CreateRequest`] | 201 [`SessionState`] |
//! | GET    | /v1/sessions/{id}                   |                 | [`SessionState`] |
//! | DELETE | /v1/sessions/{id}                   |                 | 204              |
//! | POST   | /v1/sessions/{id}/reset             |                 | [`SessionState`] |
//! | PATCH  | /v1/sessions/{id}/params            | [`ParamUpdate`] | [`SessionState`] |
//! | POST   | /v1/sessions/{id}/step              | [`StepRequest`] (optional) | [`SessionState`] |
//! | POST   | /v1/sessions/{id}/run               | [`RunRequest`] (optional)  | [`SessionState`] |
//! | POST   | /v1/sessions/{id}/pause             |                 | [`SessionState`] |
//! | GET    | /v1/sessions/{id}/stats             |                 | [`SessionStats`] |
//! | GET    | /v1/sessions/{id}/views/left.png    |                 | latest frame, hot colormap |
//! | GET    | /v1/sessions/{id}/views/right.png   |                 | window view, hot colormap |
//! | GET    | /v1/sessions/{id}/views/right_raw.png |               | window view before `C_n`, 16-bit gray |
//!
//! Errors reply `{"error":{"code":..,"message":..,"field":..}}` with one of
//! the codes in [`ApiError`].

use std::collections::{BTreeMap, VecDeque};
use std::path::PathBuf;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex};
use std::time::{Duration, Instant};

use axum::body::Bytes;
use axum::extract::rejection::JsonRejection;
use axum::extract::{FromRequest, Path, Request, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, patch, post};
use axum::{Json, Router};
use saai_core::forest::{generate_scene, render_frame_indexed, Scene};
use saai_core::geometry::{CameraIntrinsics, FocalPlaneSpec, Pose};
use saai_core::window::{detect_frame, SlidingWindow};
use saai_core::Frame;
use serde::{Deserialize, Serialize};
use tokio::task::JoinHandle;

use crate::config::SimulationConfig;
use crate::dataset;
use crate::error::Error;
use crate::imageio;
use crate::pipeline::LatencySummary;
use crate::process::{default_plane, finish, ParamUpdate, Params, Rendered};

/// Largest accepted `window_size`; also the number of frames a session keeps.
pub const MAX_WINDOW: usize = 256;
const MAX_TIMINGS: usize = 1024;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ServiceConfig {
    pub max_sessions: usize,
    /// Replay rate used by `run` when the request names none.
    pub cadence_hz: f64,
    /// `window_size` of new sessions unless the request overrides it.
    pub window_size: usize,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        ServiceConfig {
            max_sessions: 1,
            cadence_hz: 10.0,
            window_size: 30,
        }
    }
}

/// Structured error reply. Codes are stable:
/// `unknown_session` 404, `bad_request` 400, `invalid_source` 400,
/// `invalid_parameter` 422, `session_limit` 409, `no_frames` 409,
/// `render_failed` 500.
#[derive(Debug, Clone, PartialEq)]
pub struct ApiError {
    pub status: StatusCode,
    pub code: &'static str,
    pub message: String,
    pub field: Option<String>,
}

#[derive(Serialize, Deserialize)]
struct ErrorBody {
    code: String,
    message: String,
    field: Option<String>,
}

#[derive(Serialize, Deserialize)]
struct ErrorReply {
    error: ErrorBody,
}

impl ApiError {
    fn new(status: StatusCode, code: &'static str, message: impl Into<String>) -> Self {
        ApiError {
            status,
            code,
            message: message.into(),
            field: None,
        }
    }

    fn unknown_session(id: &str) -> Self {
        Self::new(StatusCode::NOT_FOUND, "unknown_session", format!("no session `{id}`"))
    }

    fn invalid_parameter(field: &str, message: impl Into<String>) -> Self {
        ApiError {
            field: Some(field.to_string()),
            ..Self::new(StatusCode::UNPROCESSABLE_ENTITY, "invalid_parameter", message)
        }
    }

    fn bad_request(message: impl Into<String>) -> Self {
        Self::new(StatusCode::BAD_REQUEST, "bad_request", message)
    }

    fn invalid_source(e: Error) -> Self {
        Self::new(StatusCode::BAD_REQUEST, "invalid_source", e.to_string())
    }

    /// Failure while rendering; parameter errors surfacing from the core
    /// keep their field name.
    fn render(e: Error) -> Self {
        let mut inner = match &e {
            Error::Core(c) => c,
            _ => return Self::new(StatusCode::INTERNAL_SERVER_ERROR, "render_failed", e.to_string()),
        };
        while let saai_core::Error::Frame { source, .. } = inner {
            inner = source;
        }
        match inner {
            saai_core::Error::InvalidParameter { name, .. } => Self::invalid_parameter(name, e.to_string()),
            _ => Self::new(StatusCode::INTERNAL_SERVER_ERROR, "render_failed", e.to_string()),
        }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let body = ErrorReply {
            error: ErrorBody {
                code: self.code.to_string(),
                message: self.message,
                field: self.field,
            },
        };
        (self.status, Json(body)).into_response()
    }
}

/// JSON body whose rejections use the structured error reply.
pub struct ApiJson<T>(pub T);

impl<S, T> FromRequest<S> for ApiJson<T>
where
    Json<T>: FromRequest<S, Rejection = JsonRejection>,
    S: Send + Sync,
{
    type Rejection = ApiError;

    async fn from_request(req: Request, state: &S) -> Result<Self, ApiError> {
        Json::<T>::from_request(req, state)
            .await
            .map(|Json(v)| ApiJson(v))
            .map_err(|e| ApiError::bad_request(e.body_text()))
    }
}

/// Body that may be empty; empty means all defaults.
fn optional_json<T: serde::de::DeserializeOwned + Default>(body: &[u8]) -> Result<T, ApiError> {
    if body.iter().all(u8::is_ascii_whitespace) {
        return Ok(T::default());
    }
    serde_json::from_slice(body).map_err(|e| ApiError::bad_request(e.to_string()))
}

/// Frame source of a session.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum SourceSpec {
    /// Replays a dataset directory.
    Dataset { path: PathBuf },
    /// Renders a simulated flight frame by frame.
    Simulation(Box<SimulationConfig>),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CreateRequest {
    pub source: SourceSpec,
    /// Applied on top of the defaults for the source's plane.
    #[serde(default)]
    pub params: ParamUpdate,
    /// Frames loaded at creation; defaults to the window size.
    #[serde(default)]
    pub prefill: Option<usize>,
}

#[derive(Debug, Clone, Copy, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StepRequest {
    #[serde(default)]
    pub count: Option<usize>,
}

#[derive(Debug, Clone, Copy, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunRequest {
    #[serde(default)]
    pub cadence_hz: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Playback {
    pub running: bool,
    pub cadence_hz: f64,
    /// Source position of the next frame.
    pub cursor: usize,
    pub frames_total: usize,
    pub exhausted: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionState {
    pub id: u64,
    /// `dataset` or `simulation`.
    pub source: String,
    pub params: Params,
    /// Focal plane of the current parameters.
    pub plane: FocalPlaneSpec,
    pub playback: Playback,
    /// Frames in the current view, oldest first.
    pub window: Vec<u64>,
    /// Increments with every render.
    pub version: u64,
    pub last_render_ms: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionStats {
    pub id: u64,
    pub renders: u64,
    pub frames_stepped: u64,
    pub render: LatencySummary,
    pub step: LatencySummary,
    /// Retained frames re-registered by the last parameter change.
    pub rewarped: usize,
}

enum Source {
    Replay(Vec<Frame>),
    Simulator {
        scene: Box<Scene>,
        intrinsics: CameraIntrinsics,
        path: Vec<Pose>,
    },
}

impl Source {
    fn kind(&self) -> &'static str {
        match self {
            Source::Replay(_) => "dataset",
            Source::Simulator { .. } => "simulation",
        }
    }

    fn len(&self) -> usize {
        match self {
            Source::Replay(f) => f.len(),
            Source::Simulator { path, .. } => path.len(),
        }
    }

    fn frame(&self, i: usize) -> crate::Result<Frame> {
        match self {
            Source::Replay(f) => Ok(f[i].clone()),
            Source::Simulator {
                scene,
                intrinsics,
                path,
            } => Ok(render_frame_indexed(scene, intrinsics, &path[i], i as u64)?),
        }
    }
}

/// Immutable output of one render.
#[derive(Clone)]
struct Snapshot {
    left: Arc<Vec<u8>>,
    right: Arc<Vec<u8>>,
    raw: Arc<Vec<u8>>,
}

pub struct Session {
    id: u64,
    source: Source,
    intrinsics: CameraIntrinsics,
    base: FocalPlaneSpec,
    initial: Params,
    prefill: usize,
    params: Params,
    window: SlidingWindow,
    history: VecDeque<Frame>,
    cursor: usize,
    snapshot: Option<Snapshot>,
    version: u64,
    running: bool,
    cadence_hz: f64,
    render_ms: VecDeque<f64>,
    step_ms: VecDeque<f64>,
    frames_stepped: u64,
}

fn push_timing(q: &mut VecDeque<f64>, v: f64) {
    if q.len() == MAX_TIMINGS {
        q.pop_front();
    }
    q.push_back(v);
}

fn check(params: &Params) -> Result<(), ApiError> {
    params
        .validate()
        .map_err(|e| ApiError::invalid_parameter(e.field, e.to_string()))?;
    if params.window_size > MAX_WINDOW {
        return Err(ApiError::invalid_parameter(
            "window_size",
            format!("window_size must be at most {MAX_WINDOW}"),
        ));
    }
    Ok(())
}

/// Window parameters: the display gain is applied after rendering.
fn window_params(params: &Params, base: &FocalPlaneSpec) -> saai_core::window::VisualParams {
    let mut v = params.visual(base);
    v.contrast = 1.0;
    v
}

impl Session {
    fn open(id: u64, req: CreateRequest, config: &ServiceConfig) -> Result<Session, ApiError> {
        let (source, intrinsics, base) = match req.source {
            SourceSpec::Dataset { path } => {
                let ds = dataset::read_dataset(&path).map_err(ApiError::invalid_source)?;
                let base = if path.join(dataset::TRUTH_META).is_file() {
                    dataset::read_ground_truth(&path)
                        .map_err(ApiError::invalid_source)?
                        .plane
                } else {
                    default_plane(&ds.frames, &ds.intrinsics).map_err(ApiError::invalid_source)?
                };
                (Source::Replay(ds.frames), ds.intrinsics, base)
            }
            SourceSpec::Simulation(cfg) => {
                cfg.validate().map_err(ApiError::invalid_source)?;
                let intrinsics = cfg.camera.intrinsics().map_err(ApiError::invalid_source)?;
                let base = cfg.truth_plane().map_err(ApiError::invalid_source)?;
                let scene = generate_scene(&cfg.scene).map_err(|e| ApiError::invalid_source(e.into()))?;
                let source = Source::Simulator {
                    scene: Box::new(scene),
                    intrinsics,
                    path: cfg.path(),
                };
                (source, intrinsics, base)
            }
        };
        if source.len() == 0 {
            return Err(ApiError::invalid_source(
                saai_core::Error::EmptyInput("source has no frames").into(),
            ));
        }
        let initial = Params::for_plane(&base, config.window_size).apply(&req.params);
        check(&initial)?;
        let window = SlidingWindow::new(intrinsics, initial.window_size, window_params(&initial, &base))
            .map_err(|e| ApiError::render(e.into()))?;
        let mut s = Session {
            id,
            source,
            intrinsics,
            base,
            initial,
            prefill: req.prefill.unwrap_or(initial.window_size),
            params: initial,
            window,
            history: VecDeque::new(),
            cursor: 0,
            snapshot: None,
            version: 0,
            running: false,
            cadence_hz: config.cadence_hz,
            render_ms: VecDeque::new(),
            step_ms: VecDeque::new(),
            frames_stepped: 0,
        };
        s.step(s.prefill)?;
        Ok(s)
    }

    pub fn state(&self) -> SessionState {
        SessionState {
            id: self.id,
            source: self.source.kind().to_string(),
            params: self.params,
            plane: self.params.visual(&self.base).plane,
            playback: Playback {
                running: self.running,
                cadence_hz: self.cadence_hz,
                cursor: self.cursor,
                frames_total: self.source.len(),
                exhausted: self.cursor >= self.source.len(),
            },
            window: self.window.frame_indices(),
            version: self.version,
            last_render_ms: self.render_ms.back().copied(),
        }
    }

    pub fn stats(&self) -> SessionStats {
        SessionStats {
            id: self.id,
            renders: self.version,
            frames_stepped: self.frames_stepped,
            render: LatencySummary::of(&Vec::from(self.render_ms.clone())),
            step: LatencySummary::of(&Vec::from(self.step_ms.clone())),
            rewarped: self.window.rewarped(),
        }
    }

    /// Advances up to `count` frames, then re-renders. Returns how many
    /// frames were consumed.
    fn step(&mut self, count: usize) -> Result<usize, ApiError> {
        let t = Instant::now();
        let mut n = 0;
        while n < count && self.cursor < self.source.len() {
            let frame = self.source.frame(self.cursor).map_err(ApiError::render)?;
            let detected = detect_frame(frame.clone(), self.window.params()).map_err(|e| ApiError::render(e.into()))?;
            self.window.push(detected).map_err(|e| ApiError::render(e.into()))?;
            if self.history.len() == MAX_WINDOW {
                self.history.pop_front();
            }
            self.history.push_back(frame);
            self.cursor += 1;
            n += 1;
        }
        if n > 0 {
            self.frames_stepped += n as u64;
            push_timing(&mut self.step_ms, t.elapsed().as_secs_f64() * 1e3);
            self.render()?;
        }
        Ok(n)
    }

    /// Applies `update` as one unit: on any error the session keeps its
    /// previous parameters and view.
    fn update(&mut self, update: &ParamUpdate) -> Result<(), ApiError> {
        let next = self.params.apply(update);
        check(&next)?;
        let visual = window_params(&next, &self.base);
        let old_visual = *self.window.params();
        if next.window_size != self.params.window_size {
            let mut w = SlidingWindow::new(self.intrinsics, next.window_size, visual)
                .map_err(|e| ApiError::render(e.into()))?;
            let skip = self.history.len().saturating_sub(next.window_size);
            for f in self.history.iter().skip(skip) {
                let d = detect_frame(f.clone(), &visual).map_err(|e| ApiError::render(e.into()))?;
                w.push(d).map_err(|e| ApiError::render(e.into()))?;
            }
            let old = std::mem::replace(&mut self.window, w);
            let prev = std::mem::replace(&mut self.params, next);
            if let Err(e) = self.render() {
                self.window = old;
                self.params = prev;
                return Err(e);
            }
            return Ok(());
        }
        self.window.set_params(visual).map_err(|e| ApiError::render(e.into()))?;
        let prev = std::mem::replace(&mut self.params, next);
        if let Err(e) = self.render() {
            self.params = prev;
            let _ = self.window.set_params(old_visual);
            return Err(e);
        }
        Ok(())
    }

    fn render(&mut self) -> Result<(), ApiError> {
        if self.window.is_empty() {
            self.snapshot = None;
            return Ok(());
        }
        let t = Instant::now();
        let rendered: Rendered = finish(&self.window, self.params.contrast).map_err(ApiError::render)?;
        let latest = self.window.latest().expect("window is not empty");
        let left = if latest.image.channels() == 1 {
            imageio::encode_colormapped_png(&latest.image)
        } else {
            imageio::encode_rgb8_png(&latest.image)
        }
        .map_err(ApiError::render)?;
        let right = imageio::encode_colormapped_png(&rendered.output.display).map_err(ApiError::render)?;
        let raw = imageio::encode_gray16_png(&rendered.raw).map_err(ApiError::render)?;
        self.snapshot = Some(Snapshot {
            left: Arc::new(left),
            right: Arc::new(right),
            raw: Arc::new(raw),
        });
        self.version += 1;
        push_timing(&mut self.render_ms, t.elapsed().as_secs_f64() * 1e3);
        Ok(())
    }

    fn reset(&mut self) -> Result<(), ApiError> {
        self.window = SlidingWindow::new(
            self.intrinsics,
            self.initial.window_size,
            window_params(&self.initial, &self.base),
        )
        .map_err(|e| ApiError::render(e.into()))?;
        self.params = self.initial;
        self.history.clear();
        self.cursor = 0;
        self.snapshot = None;
        self.step(self.prefill)?;
        Ok(())
    }
}

struct Handle {
    session: Mutex<Session>,
    runner: Mutex<Option<JoinHandle<()>>>,
}

impl Handle {
    fn stop_runner(&self) {
        if let Some(task) = self.runner.lock().expect("runner lock").take() {
            task.abort();
        }
    }
}

impl Drop for Handle {
    fn drop(&mut self) {
        self.stop_runner();
    }
}

#[derive(Clone)]
pub struct AppState {
    config: ServiceConfig,
    sessions: Arc<Mutex<BTreeMap<u64, Arc<Handle>>>>,
    next_id: Arc<AtomicU64>,
}

impl AppState {
    pub fn new(config: ServiceConfig) -> Self {
        AppState {
            config,
            sessions: Arc::new(Mutex::new(BTreeMap::new())),
            next_id: Arc::new(AtomicU64::new(1)),
        }
    }

    fn handle(&self, id: &str) -> Result<Arc<Handle>, ApiError> {
        let key: u64 = id.parse().map_err(|_| ApiError::unknown_session(id))?;
        self.sessions
            .lock()
            .expect("session table lock")
            .get(&key)
            .cloned()
            .ok_or_else(|| ApiError::unknown_session(id))
    }
}

pub fn router(config: ServiceConfig) -> Router {
    Router::new()
        .route("/v1/health", get(health))
        .route("/v1/sessions", get(list_sessions).post(create_session))
        .route("/v1/sessions/{id}", get(get_session).delete(delete_session))
        .route("/v1/sessions/{id}/reset", post(reset_session))
        .route("/v1/sessions/{id}/params", patch(update_params))
        .route("/v1/sessions/{id}/step", post(step_session))
        .route("/v1/sessions/{id}/run", post(run_session))
        .route("/v1/sessions/{id}/pause", post(pause_session))
        .route("/v1/sessions/{id}/stats", get(session_stats))
        .route("/v1/sessions/{id}/views/{view}", get(view))
        .with_state(AppState::new(config))
}

/// Serves until ctrl-c.
pub async fn serve(addr: std::net::SocketAddr, config: ServiceConfig) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    tracing::info!(addr = %listener.local_addr()?, "listening");
    axum::serve(listener, router(config))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
}

/// Runs `f` on the session off the async runtime.
async fn with_session<T, F>(handle: Arc<Handle>, f: F) -> Result<T, ApiError>
where
    T: Send + 'static,
    F: FnOnce(&mut Session) -> Result<T, ApiError> + Send + 'static,
{
    tokio::task::spawn_blocking(move || f(&mut handle.session.lock().expect("session lock")))
        .await
        .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "render_failed", e.to_string()))?
}

async fn health() -> Json<serde_json::Value> {
    Json(serde_json::json!({ "status": "ok" }))
}

async fn list_sessions(State(app): State<AppState>) -> Json<serde_json::Value> {
    let ids: Vec<u64> = app
        .sessions
        .lock()
        .expect("session table lock")
        .keys()
        .copied()
        .collect();
    Json(serde_json::json!({ "sessions": ids }))
}

async fn create_session(
    State(app): State<AppState>,
    ApiJson(req): ApiJson<CreateRequest>,
) -> Result<(StatusCode, Json<SessionState>), ApiError> {
    let full = || {
        ApiError::new(
            StatusCode::CONFLICT,
            "session_limit",
            format!("at most {} session(s); delete one first", app.config.max_sessions),
        )
    };
    if app.sessions.lock().expect("session table lock").len() >= app.config.max_sessions {
        return Err(full());
    }
    let id = app.next_id.fetch_add(1, Ordering::Relaxed);
    let config = app.config;
    let session = tokio::task::spawn_blocking(move || Session::open(id, req, &config))
        .await
        .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "render_failed", e.to_string()))??;
    let state = session.state();
    let mut table = app.sessions.lock().expect("session table lock");
    if table.len() >= app.config.max_sessions {
        return Err(full());
    }
    table.insert(
        id,
        Arc::new(Handle {
            session: Mutex::new(session),
            runner: Mutex::new(None),
        }),
    );
    Ok((StatusCode::CREATED, Json(state)))
}

async fn get_session(State(app): State<AppState>, Path(id): Path<String>) -> Result<Json<SessionState>, ApiError> {
    let h = app.handle(&id)?;
    with_session(h, |s| Ok(s.state())).await.map(Json)
}

async fn delete_session(State(app): State<AppState>, Path(id): Path<String>) -> Result<StatusCode, ApiError> {
    let h = app.handle(&id)?;
    h.stop_runner();
    app.sessions
        .lock()
        .expect("session table lock")
        .retain(|_, v| !Arc::ptr_eq(v, &h));
    Ok(StatusCode::NO_CONTENT)
}

async fn reset_session(State(app): State<AppState>, Path(id): Path<String>) -> Result<Json<SessionState>, ApiError> {
    let h = app.handle(&id)?;
    h.stop_runner();
    with_session(h, |s| {
        s.running = false;
        s.reset()?;
        Ok(s.state())
    })
    .await
    .map(Json)
}

async fn update_params(
    State(app): State<AppState>,
    Path(id): Path<String>,
    ApiJson(update): ApiJson<ParamUpdate>,
) -> Result<Json<SessionState>, ApiError> {
    let h = app.handle(&id)?;
    with_session(h, move |s| {
        s.update(&update)?;
        Ok(s.state())
    })
    .await
    .map(Json)
}

async fn step_session(
    State(app): State<AppState>,
    Path(id): Path<String>,
    body: Bytes,
) -> Result<Json<SessionState>, ApiError> {
    let h = app.handle(&id)?;
    let count = optional_json::<StepRequest>(&body)?.count.unwrap_or(1);
    with_session(h, move |s| {
        s.step(count)?;
        Ok(s.state())
    })
    .await
    .map(Json)
}

async fn run_session(
    State(app): State<AppState>,
    Path(id): Path<String>,
    body: Bytes,
) -> Result<Json<SessionState>, ApiError> {
    let h = app.handle(&id)?;
    let cadence = optional_json::<RunRequest>(&body)?
        .cadence_hz
        .unwrap_or(app.config.cadence_hz);
    if !(cadence > 0.0 && cadence <= 1000.0) {
        return Err(ApiError::invalid_parameter(
            "cadence_hz",
            "cadence_hz must lie in (0, 1000]",
        ));
    }
    h.stop_runner();
    let state = with_session(h.clone(), move |s| {
        s.running = s.cursor < s.source.len();
        s.cadence_hz = cadence;
        Ok(s.state())
    })
    .await?;
    if state.playback.running {
        let weak = Arc::downgrade(&h);
        let task = tokio::spawn(async move {
            let mut tick = tokio::time::interval(Duration::from_secs_f64(1.0 / cadence));
            tick.set_missed_tick_behavior(tokio::time::MissedTickBehavior::Delay);
            tick.tick().await;
            loop {
                tick.tick().await;
                let Some(h) = weak.upgrade() else { break };
                let more = with_session(h, |s| {
                    if !s.running {
                        return Ok(false);
                    }
                    let r = s.step(1);
                    s.running = r.is_ok() && s.cursor < s.source.len();
                    if let Err(e) = &r {
                        tracing::warn!(session = s.id, error = %e.message, "replay stopped");
                    }
                    Ok(s.running)
                })
                .await;
                if !matches!(more, Ok(true)) {
                    break;
                }
            }
        });
        *h.runner.lock().expect("runner lock") = Some(task);
    }
    Ok(Json(state))
}

async fn pause_session(State(app): State<AppState>, Path(id): Path<String>) -> Result<Json<SessionState>, ApiError> {
    let h = app.handle(&id)?;
    h.stop_runner();
    with_session(h, |s| {
        s.running = false;
        Ok(s.state())
    })
    .await
    .map(Json)
}

async fn session_stats(State(app): State<AppState>, Path(id): Path<String>) -> Result<Json<SessionStats>, ApiError> {
    let h = app.handle(&id)?;
    with_session(h, |s| Ok(s.stats())).await.map(Json)
}

async fn view(State(app): State<AppState>, Path((id, view)): Path<(String, String)>) -> Result<Response, ApiError> {
    let h = app.handle(&id)?;
    let pick: fn(&Snapshot) -> Arc<Vec<u8>> = match view.as_str() {
        "left.png" => |s| s.left.clone(),
        "right.png" => |s| s.right.clone(),
        "right_raw.png" => |s| s.raw.clone(),
        _ => {
            return Err(ApiError::new(
                StatusCode::NOT_FOUND,
                "bad_request",
                format!("unknown view `{view}`; use left.png, right.png or right_raw.png"),
            ))
        }
    };
    let snapshot = with_session(h, move |s| Ok(s.snapshot.as_ref().map(|snap| (pick(snap), s.version)))).await?;
    let (bytes, version) = snapshot.ok_or_else(|| {
        ApiError::new(
            StatusCode::CONFLICT,
            "no_frames",
            "session has not loaded any frame yet",
        )
    })?;
    Ok((
        [
            (header::CONTENT_TYPE, "image/png".to_string()),
            (header::HeaderName::from_static("x-render-version"), version.to_string()),
        ],
        bytes.as_ref().clone(),
    )
        .into_response())
}
