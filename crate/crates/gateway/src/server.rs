//! HTTP API.
//!
//! | route | purpose |
//! |---|---|
//! | `POST /ingest` | encrypted frame in, `202` + result id out |
//! | `GET /results/{id}` | outcome of an ingested frame |
//! | `POST /profile` | enroll face images |
//! | `GET /events?since=` | notification feed, newest first |
//! | `GET /recordings?date=&time=` | recorded segments or "no activity found" |
//! | `GET /media/{*path}` | a recorded frame |
//! | `GET /door`, `POST /door`, `POST /door/power` | lock state and commands |
//! | `POST /guidance` | capture guidance label for a face box |
//! | `POST /emergency` | emergency-call stub |
//! | `GET /health` | liveness and model version |
//!
//! Commands that change the door (and the emergency stub) carry an
//! `x-safegate-token` header: a token whose plaintext is the exact body.

use std::collections::{HashMap, VecDeque};
use std::sync::Arc;
use std::time::{Duration, SystemTime, UNIX_EPOCH};

use axum::body::Bytes;
use axum::extract::{DefaultBodyLimit, Path, Query, State};
use axum::http::{HeaderMap, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use base64::Engine as _;
use chrono::{NaiveDate, NaiveTime, TimeZone, Utc};
use parking_lot::Mutex;
use serde::{Deserialize, Serialize};
use serde_json::json;
use tokio::sync::mpsc;

use safegate_core::access::{Actuator, Door, DoorCommand, DoorState, SimulatedActuator};
use safegate_core::guidance::{face_position, rotation_speed_check, FaceBox, OrientationSample, RotationVerdict};
use safegate_core::imaging::{decode_png, BBox, Frame};
use safegate_core::perception::FrameManifest;

use crate::config::GatewayConfig;
use crate::error::GatewayError;
use crate::pipeline::{EnrollError, EnrollImage, Engine, FrameReport};
use crate::token::{TokenError, TokenKey};

pub const TOKEN_HEADER: &str = "x-safegate-token";
pub const NO_ACTIVITY: &str = "no activity found";
const QUEUE_DEPTH: usize = 256;
const RESULTS_KEPT: usize = 4096;
const MAX_BODY: usize = 64 * 1024 * 1024;

pub fn now_ms() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_millis() as u64)
        .unwrap_or(0)
}

struct ApiError(StatusCode, serde_json::Value);

impl ApiError {
    fn new(status: StatusCode, msg: impl std::fmt::Display) -> Self {
        Self(status, json!({ "error": msg.to_string() }))
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.0, Json(self.1)).into_response()
    }
}

impl From<GatewayError> for ApiError {
    fn from(e: GatewayError) -> Self {
        let status = match &e {
            GatewayError::Token(TokenError::MalformedKey(_)) => StatusCode::INTERNAL_SERVER_ERROR,
            GatewayError::Token(_) => StatusCode::UNAUTHORIZED,
            GatewayError::BadRequest(_) | GatewayError::Core(_) => StatusCode::BAD_REQUEST,
            GatewayError::NotFound(_) => StatusCode::NOT_FOUND,
            _ => StatusCode::INTERNAL_SERVER_ERROR,
        };
        Self::new(status, e)
    }
}

type ApiResult<T> = Result<T, ApiError>;

#[derive(Debug, Clone, Serialize)]
#[serde(tag = "status", rename_all = "lowercase")]
pub enum ResultState {
    Pending,
    Done { report: Box<FrameReport> },
    Failed { error: String },
}

#[derive(Default)]
struct ResultLog {
    states: HashMap<u64, ResultState>,
    order: VecDeque<u64>,
    next: u64,
}

impl ResultLog {
    fn open(&mut self) -> u64 {
        self.next += 1;
        let id = self.next;
        self.states.insert(id, ResultState::Pending);
        self.order.push_back(id);
        while self.order.len() > RESULTS_KEPT {
            if let Some(old) = self.order.pop_front() {
                self.states.remove(&old);
            }
        }
        id
    }
}

struct Job {
    id: u64,
    ts_ms: u64,
    frame: Frame,
    manifest: Option<FrameManifest>,
}

/// Shared state behind every handler.
pub struct AppState {
    engine: Arc<Engine>,
    key: TokenKey,
    token_ttl_s: u64,
    recording_window_ms: u64,
    door: Mutex<Door<Arc<dyn Actuator>>>,
    queues: Mutex<HashMap<String, mpsc::Sender<Job>>>,
    results: Arc<Mutex<ResultLog>>,
}

impl AppState {
    pub fn new(engine: Arc<Engine>, key: TokenKey, config: &GatewayConfig) -> Arc<Self> {
        Self::with_actuator(engine, key, config, Arc::new(SimulatedActuator::default()))
    }

    pub fn with_actuator(engine: Arc<Engine>, key: TokenKey, config: &GatewayConfig, actuator: Arc<dyn Actuator>) -> Arc<Self> {
        Arc::new(Self {
            engine,
            key,
            token_ttl_s: config.token_ttl_s,
            recording_window_ms: config.recording_window_min * 60_000,
            door: Mutex::new(Door::new(config.relock_interval_s * 1000, actuator)),
            queues: Mutex::new(HashMap::new()),
            results: Arc::new(Mutex::new(ResultLog::default())),
        })
    }

    pub fn engine(&self) -> &Arc<Engine> {
        &self.engine
    }

    pub fn door_state(&self) -> DoorState {
        self.door.lock().tick(now_ms())
    }

    fn queue(&self, camera: &str) -> mpsc::Sender<Job> {
        let mut queues = self.queues.lock();
        if let Some(tx) = queues.get(camera).filter(|tx| !tx.is_closed()) {
            return tx.clone();
        }
        let (tx, mut rx) = mpsc::channel::<Job>(QUEUE_DEPTH);
        let engine = self.engine.clone();
        let results = self.results.clone();
        let camera_id = camera.to_string();
        tokio::spawn(async move {
            while let Some(job) = rx.recv().await {
                let eng = engine.clone();
                let cam = camera_id.clone();
                let id = job.id;
                let outcome = tokio::task::spawn_blocking(move || {
                    eng.process_frame(&cam, job.ts_ms, job.frame, job.manifest.as_ref())
                })
                .await;
                let state = match outcome {
                    Ok(Ok(report)) => ResultState::Done { report: Box::new(report) },
                    Ok(Err(e)) => {
                        tracing::warn!(camera = %camera_id, error = %e, "frame processing failed");
                        ResultState::Failed { error: e.to_string() }
                    }
                    Err(e) => ResultState::Failed { error: e.to_string() },
                };
                results.lock().states.insert(id, state);
            }
        });
        queues.insert(camera.to_string(), tx.clone());
        tx
    }

    fn authenticate(&self, headers: &HeaderMap, body: &[u8]) -> ApiResult<()> {
        let token = headers
            .get(TOKEN_HEADER)
            .and_then(|v| v.to_str().ok())
            .ok_or_else(|| ApiError::new(StatusCode::UNAUTHORIZED, format!("missing {TOKEN_HEADER} header")))?;
        let plain = self
            .key
            .decrypt(token, Some(self.token_ttl_s))
            .map_err(|e| ApiError::new(StatusCode::UNAUTHORIZED, e))?;
        if plain != body {
            return Err(ApiError::new(StatusCode::UNAUTHORIZED, "token does not match request body"));
        }
        Ok(())
    }
}

pub fn router(state: Arc<AppState>) -> Router {
    Router::new()
        .route("/ingest", post(ingest))
        .route("/results/{id}", get(result))
        .route("/profile", post(profile))
        .route("/events", get(events))
        .route("/recordings", get(recordings))
        .route("/media/{*path}", get(media))
        .route("/door", get(door_get).post(door_post))
        .route("/door/power", post(door_power))
        .route("/guidance", post(guidance))
        .route("/emergency", post(emergency))
        .route("/health", get(health))
        .layer(DefaultBodyLimit::max(MAX_BODY))
        .with_state(state)
}

/// Relock the door on time even when nobody is polling.
pub fn spawn_door_ticker(state: Arc<AppState>, every: Duration) -> tokio::task::JoinHandle<()> {
    tokio::spawn(async move {
        let mut interval = tokio::time::interval(every);
        loop {
            interval.tick().await;
            state.door.lock().tick(now_ms());
        }
    })
}

/// Bind and serve until `shutdown` resolves.
pub async fn serve(
    config: GatewayConfig,
    engine: Arc<Engine>,
    key: TokenKey,
    shutdown: impl std::future::Future<Output = ()> + Send + 'static,
) -> crate::Result<()> {
    let state = AppState::new(engine, key, &config);
    let ticker = spawn_door_ticker(state.clone(), Duration::from_millis(250));
    let listener = tokio::net::TcpListener::bind(config.bind).await?;
    tracing::info!(addr = %listener.local_addr()?, "safegate gateway listening");
    axum::serve(listener, router(state)).with_graceful_shutdown(shutdown).await?;
    ticker.abort();
    Ok(())
}

// --- ingest ---------------------------------------------------------------

#[derive(Debug, Deserialize)]
pub struct IngestRequest {
    pub camera_id: String,
    /// Token over the PNG-encoded frame.
    pub token: String,
    #[serde(default)]
    pub timestamp_ms: Option<u64>,
    #[serde(default)]
    pub manifest: Option<FrameManifest>,
}

async fn ingest(State(s): State<Arc<AppState>>, Json(req): Json<IngestRequest>) -> ApiResult<Response> {
    if req.camera_id.trim().is_empty() {
        return Err(ApiError::new(StatusCode::BAD_REQUEST, "camera_id is empty"));
    }
    let png = s.key.decrypt(&req.token, Some(s.token_ttl_s)).map_err(|e| {
        tracing::warn!(camera = %req.camera_id, error = %e, "rejected ingest token");
        ApiError::new(StatusCode::UNAUTHORIZED, e)
    })?;
    let frame = decode_png(&png).map_err(|e| {
        tracing::warn!(camera = %req.camera_id, error = %e, "undecodable frame");
        ApiError::new(StatusCode::BAD_REQUEST, format!("bad frame: {e}"))
    })?;
    let ts_ms = req.timestamp_ms.unwrap_or_else(now_ms);
    let id = s.results.lock().open();
    let job = Job { id, ts_ms, frame, manifest: req.manifest };
    if let Err(e) = s.queue(&req.camera_id).try_send(job) {
        s.results.lock().states.insert(id, ResultState::Failed { error: "queue full".into() });
        return Err(ApiError::new(StatusCode::SERVICE_UNAVAILABLE, format!("camera queue: {e}")));
    }
    Ok((StatusCode::ACCEPTED, Json(json!({ "result_id": id, "camera_id": req.camera_id }))).into_response())
}

async fn result(State(s): State<Arc<AppState>>, Path(id): Path<u64>) -> ApiResult<Response> {
    let state = s.results.lock().states.get(&id).cloned();
    match state {
        Some(st @ ResultState::Pending) => Ok((StatusCode::ACCEPTED, Json(st)).into_response()),
        Some(st) => Ok(Json(st).into_response()),
        None => Err(ApiError::new(StatusCode::NOT_FOUND, format!("no result {id}"))),
    }
}

// --- profiles -------------------------------------------------------------

#[derive(Debug, Deserialize)]
pub struct ProfileImage {
    /// Standard base64 of a PNG.
    pub png: String,
    /// `[x, y, w, h]` of the face, if the client detected one.
    #[serde(default)]
    pub face: Option<[u32; 4]>,
}

#[derive(Debug, Deserialize)]
pub struct ProfileRequest {
    pub name: String,
    #[serde(default)]
    pub contact: String,
    pub images: Vec<ProfileImage>,
}

async fn profile(State(s): State<Arc<AppState>>, Json(req): Json<ProfileRequest>) -> ApiResult<Response> {
    if req.images.is_empty() {
        return Err(ApiError::new(StatusCode::BAD_REQUEST, "no images"));
    }
    let mut images = Vec::with_capacity(req.images.len());
    for (i, img) in req.images.iter().enumerate() {
        let bytes = base64::engine::general_purpose::STANDARD
            .decode(img.png.trim())
            .map_err(|e| ApiError::new(StatusCode::BAD_REQUEST, format!("image {i}: {e}")))?;
        let frame = decode_png(&bytes).map_err(|e| ApiError::new(StatusCode::BAD_REQUEST, format!("image {i}: {e}")))?;
        images.push(EnrollImage { frame, face: img.face.map(|[x, y, w, h]| BBox::new(x, y, w, h)) });
    }
    let engine = s.engine.clone();
    let outcome = tokio::task::spawn_blocking(move || engine.enroll(&req.name, &req.contact, &images, now_ms()))
        .await
        .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, e))?;
    match outcome {
        Ok(o) => Ok((StatusCode::CREATED, Json(o)).into_response()),
        Err(EnrollError::NoUsableFace { labels }) => Err(ApiError(
            StatusCode::UNPROCESSABLE_ENTITY,
            json!({ "error": "no usable face", "labels": labels }),
        )),
        Err(EnrollError::Other(e)) => Err(e.into()),
    }
}

// --- feed and recordings --------------------------------------------------

#[derive(Debug, Deserialize)]
pub struct EventsQuery {
    #[serde(default)]
    pub since: u64,
    #[serde(default)]
    pub limit: Option<usize>,
}

async fn events(State(s): State<Arc<AppState>>, Query(q): Query<EventsQuery>) -> impl IntoResponse {
    Json(s.engine.store().events_since(q.since, q.limit.unwrap_or(100)))
}

#[derive(Debug, Deserialize)]
pub struct RecordingsQuery {
    pub date: String,
    pub time: String,
    #[serde(default)]
    pub window_min: Option<u64>,
}

/// Milliseconds since the epoch for a UTC `YYYY-MM-DD` + `HH:MM`.
pub fn parse_time_point(date: &str, time: &str) -> Result<u64, String> {
    let d = NaiveDate::parse_from_str(date, "%Y-%m-%d").map_err(|e| format!("date {date:?}: {e}"))?;
    let t = NaiveTime::parse_from_str(time, "%H:%M").map_err(|e| format!("time {time:?}: {e}"))?;
    let ms = Utc.from_utc_datetime(&d.and_time(t)).timestamp_millis();
    u64::try_from(ms).map_err(|_| "time before 1970".to_string())
}

async fn recordings(State(s): State<Arc<AppState>>, Query(q): Query<RecordingsQuery>) -> ApiResult<Response> {
    let from = parse_time_point(&q.date, &q.time).map_err(|e| ApiError::new(StatusCode::BAD_REQUEST, e))?;
    let window = q.window_min.map(|m| m * 60_000).unwrap_or(s.recording_window_ms).max(1);
    let segments = s.engine.store().recordings_between(from, from + window);
    let status = if segments.is_empty() { NO_ACTIVITY } else { "ok" };
    Ok(Json(json!({ "status": status, "from_ms": from, "to_ms": from + window, "segments": segments })).into_response())
}

async fn media(State(s): State<Arc<AppState>>, Path(path): Path<String>) -> ApiResult<Response> {
    let ok = path.starts_with("recordings/")
        && path.ends_with(".png")
        && !path.split('/').any(|c| c == ".." || c.is_empty());
    if !ok {
        return Err(ApiError::new(StatusCode::NOT_FOUND, "no such media"));
    }
    let bytes = tokio::fs::read(s.engine.store().path_of(&path))
        .await
        .map_err(|_| ApiError::new(StatusCode::NOT_FOUND, "no such media"))?;
    Ok(([(axum::http::header::CONTENT_TYPE, "image/png")], bytes).into_response())
}

// --- door -----------------------------------------------------------------

#[derive(Debug, Serialize, Deserialize)]
pub struct DoorView {
    pub state: String,
    pub relock_deadline: Option<u64>,
    pub powered: bool,
    pub now_ms: u64,
}

fn door_view(d: DoorState, now: u64) -> DoorView {
    DoorView {
        state: d.state.to_string(),
        relock_deadline: d.relock_deadline,
        powered: d.powered,
        now_ms: now,
    }
}

async fn door_get(State(s): State<Arc<AppState>>) -> impl IntoResponse {
    let now = now_ms();
    Json(door_view(s.door.lock().tick(now), now))
}

#[derive(Debug, Deserialize)]
struct DoorRequest {
    command: DoorCommand,
}

async fn door_post(State(s): State<Arc<AppState>>, headers: HeaderMap, body: Bytes) -> ApiResult<Response> {
    s.authenticate(&headers, &body)?;
    let req: DoorRequest = serde_json::from_slice(&body).map_err(|e| ApiError::new(StatusCode::BAD_REQUEST, e))?;
    let now = now_ms();
    let mut door = s.door.lock();
    door.tick(now);
    match door.command(req.command, now) {
        Ok(d) => Ok(Json(door_view(d, now)).into_response()),
        Err(safegate_core::Error::Unpowered) => Err(ApiError(
            StatusCode::CONFLICT,
            json!({ "error": "lock has no power; door stays locked", "state": "locked" }),
        )),
        Err(e) => Err(ApiError::new(StatusCode::BAD_REQUEST, e)),
    }
}

#[derive(Debug, Deserialize)]
struct PowerRequest {
    powered: bool,
}

async fn door_power(State(s): State<Arc<AppState>>, headers: HeaderMap, body: Bytes) -> ApiResult<Response> {
    s.authenticate(&headers, &body)?;
    let req: PowerRequest = serde_json::from_slice(&body).map_err(|e| ApiError::new(StatusCode::BAD_REQUEST, e))?;
    let now = now_ms();
    let d = s.door.lock().power_event(req.powered);
    Ok(Json(door_view(d, now)).into_response())
}

// --- guidance, emergency, health -------------------------------------------

#[derive(Debug, Deserialize)]
pub struct GuidanceRequest {
    pub window_w: i64,
    pub window_h: i64,
    /// `[x, y, w, h]`
    #[serde(rename = "box")]
    pub face: [i64; 4],
    #[serde(default)]
    pub orientation: Vec<OrientationSample>,
}

async fn guidance(Json(req): Json<GuidanceRequest>) -> ApiResult<Response> {
    let [x, y, w, h] = req.face;
    let label = FaceBox::new(x, y, w, h)
        .and_then(|b| face_position(req.window_w, req.window_h, b))
        .map_err(|e| ApiError::new(StatusCode::BAD_REQUEST, e))?;
    let rotation = if req.orientation.is_empty() {
        None
    } else {
        Some(rotation_speed_check(&req.orientation).map_err(|e| ApiError::new(StatusCode::BAD_REQUEST, e))?)
    };
    let warning = matches!(rotation, Some(RotationVerdict::TooFast)).then_some("too fast");
    Ok(Json(json!({ "label": label.as_str(), "rotation": rotation, "warning": warning })).into_response())
}

#[derive(Debug, Deserialize)]
struct EmergencyRequest {
    camera_id: String,
    #[serde(default)]
    message: Option<String>,
}

async fn emergency(State(s): State<Arc<AppState>>, headers: HeaderMap, body: Bytes) -> ApiResult<Response> {
    s.authenticate(&headers, &body)?;
    let req: EmergencyRequest = serde_json::from_slice(&body).map_err(|e| ApiError::new(StatusCode::BAD_REQUEST, e))?;
    let msg = req.message.unwrap_or_else(|| "Emergency assistance requested by the resident.".into());
    let engine = s.engine.clone();
    let out = tokio::task::spawn_blocking(move || engine.emergency_call(&req.camera_id, &msg, now_ms()))
        .await
        .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, e))??;
    Ok((StatusCode::ACCEPTED, Json(out)).into_response())
}

async fn health(State(s): State<Arc<AppState>>) -> impl IntoResponse {
    let model = s.engine.model();
    Json(json!({
        "status": "ok",
        "model_version": s.engine.store().model_version(),
        "persons": model.persons().len(),
        "door": s.door_state().state.to_string(),
    }))
}
