//! HTTP endpoints and the live websocket stream.

use std::collections::{BTreeMap, HashMap};
use std::path::PathBuf;
use std::sync::{Arc, RwLock};
use std::time::Duration;

use antsteer::acs::AcsError;
use antsteer::live::LiveMessage;
use antsteer::session::{Intervention, SessionError};
use antsteer::{corpus, parse_tsplib, AcsParams, Instance, LiveOptions, Session, SessionHandle, SteeringScript, Status};
use axum::body::Bytes;
use axum::extract::ws::{Message, WebSocket, WebSocketUpgrade};
use axum::extract::{Path, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use tokio::sync::mpsc;

use crate::wire::{Control, ErrorPayload, Sequencer, SteeringAck, WireKind, WireMessage};

#[derive(Debug, Clone)]
pub struct ServiceConfig {
    /// Sessions persist to `<data_dir>/sessions/<id>`, uploads to
    /// `<data_dir>/instances`.
    pub data_dir: Option<PathBuf>,
    pub iteration_delay: Duration,
    pub default_hif: f64,
    pub default_params: AcsParams,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        ServiceConfig {
            data_dir: None,
            iteration_delay: Duration::ZERO,
            default_hif: crate::config::DEFAULT_HIF,
            default_params: AcsParams::default(),
        }
    }
}

#[derive(Clone)]
pub struct AppState(Arc<Inner>);

struct Inner {
    config: ServiceConfig,
    sessions: RwLock<HashMap<String, SessionHandle>>,
    uploads: RwLock<BTreeMap<String, Arc<Instance>>>,
}

impl AppState {
    /// Loads previously uploaded instances from the data directory.
    pub fn new(config: ServiceConfig) -> std::io::Result<Self> {
        let mut uploads = BTreeMap::new();
        if let Some(dir) = &config.data_dir {
            let dir = dir.join("instances");
            if dir.is_dir() {
                for entry in std::fs::read_dir(&dir)? {
                    let path = entry?.path();
                    if path.extension().is_some_and(|e| e == "tsp") {
                        if let Ok(inst) = parse_tsplib(&std::fs::read_to_string(&path)?) {
                            uploads.insert(inst.name().to_string(), Arc::new(inst));
                        }
                    }
                }
            }
        }
        Ok(AppState(Arc::new(Inner { config, sessions: RwLock::default(), uploads: RwLock::new(uploads) })))
    }

    fn session(&self, id: &str) -> Option<SessionHandle> {
        self.0.sessions.read().expect("registry lock").get(id).cloned()
    }

    fn instance(&self, name: &str) -> Option<Arc<Instance>> {
        if let Some(inst) = self.0.uploads.read().expect("upload lock").get(name) {
            return Some(inst.clone());
        }
        corpus::load(name).map(Arc::new)
    }

    fn session_dir(&self, id: &str) -> Option<PathBuf> {
        self.0.config.data_dir.as_ref().map(|d| d.join("sessions").join(id))
    }
}

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/sessions", post(create_session))
        .route("/sessions/{id}", get(get_session))
        .route("/sessions/{id}/control", post(control))
        .route("/sessions/{id}/result", get(get_result))
        .route("/sessions/{id}/live", get(live))
        .route("/instances", get(list_instances).post(upload_instance))
        .with_state(state)
}

#[derive(Debug, Serialize)]
pub struct FieldError {
    pub field: String,
    pub message: String,
}

/// Error responses: `{"error": code, "message": ...}`, plus `fields` on
/// validation failures.
#[derive(Debug)]
pub enum ApiError {
    Validation(Vec<FieldError>),
    NotFound(String),
    Conflict(String),
    Unprocessable(String),
    Internal(String),
}

impl ApiError {
    fn field(field: &str, message: impl ToString) -> Self {
        ApiError::Validation(vec![FieldError { field: field.into(), message: message.to_string() }])
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let (status, body) = match self {
            ApiError::Validation(fields) => (
                StatusCode::BAD_REQUEST,
                json!({"error": "validation", "message": "request failed validation", "fields": fields}),
            ),
            ApiError::NotFound(m) => (StatusCode::NOT_FOUND, json!({"error": "not_found", "message": m})),
            ApiError::Conflict(m) => (StatusCode::CONFLICT, json!({"error": "conflict", "message": m})),
            ApiError::Unprocessable(m) => {
                (StatusCode::UNPROCESSABLE_ENTITY, json!({"error": "unavailable", "message": m}))
            }
            ApiError::Internal(m) => (StatusCode::INTERNAL_SERVER_ERROR, json!({"error": "internal", "message": m})),
        };
        (status, Json(body)).into_response()
    }
}

impl From<SessionError> for ApiError {
    fn from(e: SessionError) -> Self {
        match e {
            SessionError::IllegalTransition { .. } | SessionError::Finished | SessionError::NotComparable => {
                ApiError::Conflict(e.to_string())
            }
            SessionError::Steering(_) => ApiError::field("update", e),
            SessionError::Acs(AcsError::InvalidParam { field, .. }) => ApiError::field(&format!("params.{field}"), e),
            SessionError::Acs(AcsError::Steering(_)) => ApiError::field("hif", e),
            SessionError::OptimumUnavailable { .. } => ApiError::Unprocessable(e.to_string()),
            SessionError::ScriptOrder { .. } | SessionError::ScriptEntry { .. } => ApiError::field("script", e),
            other => ApiError::Internal(other.to_string()),
        }
    }
}

/// Code carried by stream ERROR frames, matching the HTTP classification.
fn error_code(e: &SessionError) -> &'static str {
    match e {
        SessionError::IllegalTransition { .. } | SessionError::Finished | SessionError::NotComparable => "conflict",
        SessionError::Steering(_)
        | SessionError::Acs(_)
        | SessionError::ScriptOrder { .. }
        | SessionError::ScriptEntry { .. } => "validation",
        SessionError::OptimumUnavailable { .. } => "unavailable",
        _ => "internal",
    }
}

async fn blocking<R: Send + 'static>(f: impl FnOnce() -> R + Send + 'static) -> Result<R, ApiError> {
    tokio::task::spawn_blocking(f).await.map_err(|e| ApiError::Internal(e.to_string()))
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct CreateBody {
    instance_ref: Option<String>,
    tsplib: Option<String>,
    params: Option<Value>,
    hif: Option<f64>,
    script: Option<Vec<Intervention<f64>>>,
    iteration_delay_ms: Option<u64>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct Created {
    pub session_id: String,
}

/// Requested parameters laid over the service defaults.
fn merge_params(defaults: &AcsParams, requested: Option<Value>) -> Result<AcsParams, ApiError> {
    let Some(requested) = requested else {
        return Ok(defaults.clone());
    };
    let Value::Object(fields) = requested else {
        return Err(ApiError::field("params", "expected an object"));
    };
    let Value::Object(mut merged) = serde_json::to_value(defaults).expect("params serialize") else {
        unreachable!("params serialize to an object")
    };
    if fields.contains_key("m") {
        merged.remove("ants");
    }
    merged.extend(fields);
    serde_json::from_value(Value::Object(merged)).map_err(|e| ApiError::field("params", e))
}

async fn create_session(State(state): State<AppState>, body: Bytes) -> Result<Response, ApiError> {
    let body: CreateBody = serde_json::from_slice(&body).map_err(|e| ApiError::field("body", e))?;
    let mut errors = Vec::new();
    let instance = match (&body.instance_ref, &body.tsplib) {
        (Some(_), Some(_)) => {
            errors.push(FieldError { field: "instance_ref".into(), message: "give instance_ref or tsplib, not both".into() });
            None
        }
        (None, None) => {
            errors.push(FieldError { field: "instance_ref".into(), message: "instance_ref or tsplib is required".into() });
            None
        }
        (Some(name), None) => match state.instance(name) {
            Some(inst) => Some(inst),
            None => return Err(ApiError::NotFound(format!("no instance named {name}"))),
        },
        (None, Some(text)) => match parse_tsplib(text) {
            Ok(inst) => Some(Arc::new(inst)),
            Err(e) => {
                errors.push(FieldError { field: "tsplib".into(), message: e.to_string() });
                None
            }
        },
    };
    let params = match merge_params(&state.0.config.default_params, body.params) {
        Ok(p) => match p.validate() {
            Ok(()) => Some(p),
            Err(AcsError::InvalidParam { field, reason }) => {
                errors.push(FieldError { field: format!("params.{field}"), message: format!("{field} {reason}") });
                None
            }
            Err(e) => {
                errors.push(FieldError { field: "params".into(), message: e.to_string() });
                None
            }
        },
        Err(ApiError::Validation(mut f)) => {
            errors.append(&mut f);
            None
        }
        Err(other) => return Err(other),
    };
    let hif = body.hif.unwrap_or(state.0.config.default_hif);
    if !(0.0..=1.0).contains(&hif) {
        errors.push(FieldError { field: "hif".into(), message: format!("impact factor {hif} is outside [0, 1]") });
    }
    let script = SteeringScript::new(body.script.unwrap_or_default());
    if let (Some(inst), Some(p)) = (&instance, &params) {
        if let Err(e) = script.validate(inst.dimension(), p.iterations, hif) {
            errors.push(FieldError { field: "script".into(), message: e.to_string() });
        }
    }
    let (Some(instance), Some(params), true) = (instance, params, errors.is_empty()) else {
        return Err(ApiError::Validation(errors));
    };

    let session = Session::create(instance, params, hif)?;
    let id = session.id().to_string();
    let options = LiveOptions {
        iteration_delay: body.iteration_delay_ms.map_or(state.0.config.iteration_delay, Duration::from_millis),
        persist_dir: state.session_dir(&id),
        script,
    };
    let handle = SessionHandle::spawn(session, options);
    state.0.sessions.write().expect("registry lock").insert(id.clone(), handle);
    Ok((StatusCode::CREATED, Json(Created { session_id: id })).into_response())
}

fn find(state: &AppState, id: &str) -> Result<SessionHandle, ApiError> {
    state.session(id).ok_or_else(|| ApiError::NotFound(format!("no session {id}")))
}

async fn get_session(State(state): State<AppState>, Path(id): Path<String>) -> Result<Response, ApiError> {
    let handle = find(&state, &id)?;
    let snapshot = blocking(move || handle.snapshot()).await?.map_err(|e| ApiError::Internal(e.to_string()))?;
    Ok(Json(snapshot).into_response())
}

/// Runs one control request against a session; shared by HTTP and the stream.
fn apply_control(handle: &SessionHandle, control: Control) -> Result<Value, SessionError> {
    Ok(match control {
        Control::Start => json!({ "status": handle.start()? }),
        Control::Pause => json!({ "status": handle.pause()? }),
        Control::Resume => json!({ "status": handle.resume()? }),
        Control::SteeringUpdate { update } => json!(SteeringAck { version: handle.steer(update)? }),
        Control::Compare { force } => json!(handle.compare(force)?),
    })
}

async fn control(State(state): State<AppState>, Path(id): Path<String>, body: Bytes) -> Result<Response, ApiError> {
    let handle = find(&state, &id)?;
    let control: Control = serde_json::from_slice(&body).map_err(|e| ApiError::field("body", e))?;
    let out = blocking(move || apply_control(&handle, control)).await??;
    Ok(Json(out).into_response())
}

async fn get_result(State(state): State<AppState>, Path(id): Path<String>) -> Result<Response, ApiError> {
    let Some(handle) = state.session(&id) else {
        // Sessions from an earlier server process are served from disk.
        let path = state.session_dir(&id).map(|d| d.join("result.json"));
        return match path.and_then(|p| std::fs::read(p).ok()) {
            Some(bytes) => Ok(([(axum::http::header::CONTENT_TYPE, "application/json")], bytes).into_response()),
            None => Err(ApiError::NotFound(format!("no session {id}"))),
        };
    };
    let (snapshot, result) = blocking(move || (handle.snapshot(), handle.result())).await?;
    let internal = |e: antsteer::live::WorkerGone| ApiError::Internal(e.to_string());
    if snapshot.map_err(internal)?.status != Status::Finished {
        return Err(ApiError::Conflict("session has not finished".into()));
    }
    Ok(Json(result.map_err(internal)?).into_response())
}

#[derive(Debug, Serialize, Deserialize)]
pub struct InstanceInfo {
    pub name: String,
    pub dimension: usize,
    pub edge_weight_type: antsteer::EdgeWeightType,
    pub source: InstanceSource,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InstanceSource {
    Bundled,
    Uploaded,
}

fn info(name: &str, inst: &Instance, source: InstanceSource) -> InstanceInfo {
    InstanceInfo {
        name: name.to_string(),
        dimension: inst.dimension(),
        edge_weight_type: inst.edge_weight_type(),
        source,
    }
}

async fn list_instances(State(state): State<AppState>) -> Json<Vec<InstanceInfo>> {
    let mut out: Vec<InstanceInfo> = corpus::BUNDLED
        .iter()
        .map(|(name, _)| info(name, &corpus::load(name).expect("bundled"), InstanceSource::Bundled))
        .collect();
    for (name, inst) in state.0.uploads.read().expect("upload lock").iter() {
        out.push(info(name, inst, InstanceSource::Uploaded));
    }
    Json(out)
}

/// Body is TSPLIB text; the instance is registered under its NAME.
async fn upload_instance(State(state): State<AppState>, body: String) -> Result<Response, ApiError> {
    let inst = parse_tsplib(&body).map_err(|e| ApiError::field("tsplib", e))?;
    let name = inst.name().to_string();
    let valid_name = !name.is_empty() && name.chars().all(|c| c.is_ascii_alphanumeric() || "-_.".contains(c));
    if !valid_name {
        return Err(ApiError::field("tsplib", format!("NAME {name:?} must be letters, digits, '-', '_' or '.'")));
    }
    if corpus::text(&name).is_some() {
        return Err(ApiError::Conflict(format!("{name} is a bundled instance")));
    }
    if let Some(dir) = &state.0.config.data_dir {
        let dir = dir.join("instances");
        std::fs::create_dir_all(&dir)
            .and_then(|()| std::fs::write(dir.join(format!("{name}.tsp")), &body))
            .map_err(|e| ApiError::Internal(e.to_string()))?;
    }
    let response = info(&name, &inst, InstanceSource::Uploaded);
    state.0.uploads.write().expect("upload lock").insert(name, Arc::new(inst));
    Ok((StatusCode::CREATED, Json(response)).into_response())
}

async fn live(ws: WebSocketUpgrade, State(state): State<AppState>, Path(id): Path<String>) -> Response {
    let handle = state.session(&id);
    ws.on_upgrade(move |socket| stream(socket, id, handle))
}

async fn send(socket: &mut WebSocket, frame: WireMessage) -> bool {
    let text = serde_json::to_string(&frame).expect("frames serialize");
    socket.send(Message::Text(text.into())).await.is_ok()
}

/// Forwards session messages as frames and applies control frames from the
/// client. Closes after the final snapshot of a finished session.
async fn stream(mut socket: WebSocket, id: String, handle: Option<SessionHandle>) {
    let mut seq = Sequencer::new(&id);
    let Some(handle) = handle else {
        let frame = seq.frame(WireKind::Error, ErrorPayload::new("not_found", format!("no session {id}")));
        send(&mut socket, frame).await;
        let _ = socket.send(Message::Close(None)).await;
        return;
    };
    let Ok(updates) = handle.subscribe() else {
        let _ = socket.send(Message::Close(None)).await;
        return;
    };
    let (tx, mut rx) = mpsc::unbounded_channel();
    tokio::task::spawn_blocking(move || {
        for message in updates {
            if tx.send(message).is_err() {
                break;
            }
        }
    });
    loop {
        tokio::select! {
            message = rx.recv() => {
                let frame = match message {
                    Some(LiveMessage::Snapshot(s)) => seq.frame(WireKind::Snapshot, &*s),
                    Some(LiveMessage::Event(e)) => seq.frame(WireKind::Event, &e),
                    None => break,
                };
                if !send(&mut socket, frame).await {
                    return;
                }
            }
            incoming = socket.recv() => {
                let text = match incoming {
                    Some(Ok(Message::Text(text))) => text,
                    Some(Ok(Message::Close(_))) | None | Some(Err(_)) => return,
                    Some(Ok(_)) => continue,
                };
                let frame = match serde_json::from_str::<Control>(text.as_str()) {
                    Err(e) => seq.frame(WireKind::Error, ErrorPayload::new("bad_frame", e)),
                    Ok(control) => {
                        let steering = matches!(control, Control::SteeringUpdate { .. });
                        let compare = matches!(control, Control::Compare { .. });
                        let h = handle.clone();
                        match tokio::task::spawn_blocking(move || apply_control(&h, control)).await {
                            Err(e) => seq.frame(WireKind::Error, ErrorPayload::new("internal", e)),
                            Ok(Err(e)) => seq.frame(WireKind::Error, ErrorPayload::new(error_code(&e), &e)),
                            Ok(Ok(value)) if steering => seq.frame(WireKind::SteeringAck, value),
                            Ok(Ok(_)) if compare => {
                                let h = handle.clone();
                                match tokio::task::spawn_blocking(move || h.snapshot()).await {
                                    Ok(Ok(s)) => seq.frame(WireKind::Snapshot, s),
                                    _ => continue,
                                }
                            }
                            Ok(Ok(_)) => continue,
                        }
                    }
                };
                if !send(&mut socket, frame).await {
                    return;
                }
            }
        }
    }
    let _ = socket.send(Message::Close(None)).await;
}
