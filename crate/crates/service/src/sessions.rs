//! Session registry, metering and the request handlers.

use std::collections::{BTreeMap, HashMap};
use std::sync::{Arc, Mutex, MutexGuard, TryLockError};
use std::time::{Duration, Instant, SystemTime, UNIX_EPOCH};

use axum::extract::{Path, Query, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::Json;
use framekit_core::inference::{new_token, Counters, Engine};
use framekit_core::interchange::{snapshot_from_xml, snapshot_to_xml};
use framekit_core::{make_value, value::is_identifier, FrameKind, InferenceError, InferenceSession, Outcome};
use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value as JsonValue};

use crate::json::{outcome_json, question_json, raw_from_json, trace_event_json, value_to_json};

pub struct Config {
    /// Idle time after which a session is evicted.
    pub ttl: Duration,
    /// Origin allowed by CORS; any origin when unset.
    pub cors_origin: Option<String>,
}

impl Default for Config {
    fn default() -> Self {
        Config { ttl: Duration::from_secs(3600), cors_origin: None }
    }
}

/// Monotonic usage counters.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct Metrics {
    pub sessions_started: u64,
    pub sessions_completed: u64,
    pub questions_asked: u64,
    pub rules_fired: u64,
    pub remote_calls: u64,
    pub rules_fired_by_frame: BTreeMap<String, u64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SessionState {
    Running,
    AwaitingAnswer,
    Done,
    Failed,
}

struct Record {
    session: InferenceSession,
    goal: String,
    state: SessionState,
    /// `question`, `result` or `error` of the latest step.
    step: Map<String, JsonValue>,
    /// Successful answers by question id: (value, reply).
    applied: HashMap<String, (JsonValue, JsonValue)>,
    created: u64,
    updated: u64,
    seen: Counters,
    seen_fires: BTreeMap<String, u64>,
}

struct Entry {
    record: Arc<Mutex<Record>>,
    touched: Instant,
}

struct Inner {
    engine: Arc<Engine>,
    config: Config,
    sessions: Mutex<HashMap<String, Entry>>,
    metrics: Mutex<Metrics>,
}

/// Shared service state.
#[derive(Clone)]
pub struct Service(Arc<Inner>);

pub(crate) struct ApiError {
    status: StatusCode,
    code: String,
    message: String,
    extra: Map<String, JsonValue>,
}

impl ApiError {
    fn new(status: StatusCode, code: &str, message: impl Into<String>) -> Self {
        ApiError { status, code: code.to_string(), message: message.into(), extra: Map::new() }
    }

    fn with(mut self, key: &str, value: JsonValue) -> Self {
        self.extra.insert(key.to_string(), value);
        self
    }

    fn not_found(id: &str) -> Self {
        ApiError::new(StatusCode::NOT_FOUND, "UnknownSession", format!("no session `{id}`"))
    }

    fn busy() -> Self {
        ApiError::new(StatusCode::CONFLICT, "SessionBusy", "another request is using this session")
    }
}

impl From<InferenceError> for ApiError {
    fn from(e: InferenceError) -> Self {
        let status = match &e {
            InferenceError::UnknownFrame(_) | InferenceError::UnknownSlot { .. } => StatusCode::NOT_FOUND,
            InferenceError::WrongQuestion { .. }
            | InferenceError::NoPendingQuestion
            | InferenceError::QuestionPending(_) => StatusCode::CONFLICT,
            InferenceError::AnswerTypeMismatch { .. }
            | InferenceError::TypeMismatch { .. }
            | InferenceError::ConstraintViolation { .. } => StatusCode::UNPROCESSABLE_ENTITY,
            _ if e.code() == "WorldVersionMismatch" => StatusCode::GONE,
            _ => StatusCode::INTERNAL_SERVER_ERROR,
        };
        let mut err = ApiError::new(status, e.code(), e.to_string());
        match e {
            InferenceError::AnswerTypeMismatch { expected, .. } => err = err.with("expected", json!(expected.name())),
            InferenceError::ConstraintViolation { violations, question } => {
                err = err.with("violations", json!(violations));
                if let Some(q) = question {
                    err = err.with("question", question_json(&q));
                }
            }
            InferenceError::WrongQuestion { expected, .. } => err = err.with("expected", json!(expected)),
            _ => {}
        }
        err
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let mut body = Map::new();
        body.insert("error".into(), json!(self.code));
        body.insert("message".into(), json!(self.message));
        body.extend(self.extra);
        (self.status, Json(JsonValue::Object(body))).into_response()
    }
}

fn unix_now() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs())
}

fn lock_record(rec: &Mutex<Record>) -> Result<MutexGuard<'_, Record>, ApiError> {
    match rec.try_lock() {
        Ok(g) => Ok(g),
        Err(TryLockError::Poisoned(p)) => Ok(p.into_inner()),
        Err(TryLockError::WouldBlock) => Err(ApiError::busy()),
    }
}

/// `Frame.slot`.
fn parse_goal(goal: &str) -> Option<(&str, &str)> {
    let (frame, slot) = goal.split_once('.')?;
    (is_identifier(frame) && is_identifier(slot)).then_some((frame, slot))
}

impl Service {
    pub fn new(engine: Arc<Engine>, config: Config) -> Self {
        Service(Arc::new(Inner {
            engine,
            config,
            sessions: Mutex::new(HashMap::new()),
            metrics: Mutex::new(Metrics::default()),
        }))
    }

    pub fn config(&self) -> &Config {
        &self.0.config
    }

    pub fn engine(&self) -> &Arc<Engine> {
        &self.0.engine
    }

    pub fn metrics(&self) -> Metrics {
        self.0.metrics.lock().unwrap().clone()
    }

    /// Live sessions, after evicting expired ones.
    pub fn session_count(&self) -> usize {
        let mut map = self.0.sessions.lock().unwrap();
        self.evict(&mut map);
        map.len()
    }

    fn evict(&self, map: &mut HashMap<String, Entry>) {
        let ttl = self.0.config.ttl;
        map.retain(|_, e| e.touched.elapsed() <= ttl);
    }

    fn lookup(&self, id: &str) -> Result<Arc<Mutex<Record>>, ApiError> {
        let mut map = self.0.sessions.lock().unwrap();
        self.evict(&mut map);
        let entry = map.get_mut(id).ok_or_else(|| ApiError::not_found(id))?;
        entry.touched = Instant::now();
        Ok(entry.record.clone())
    }

    fn insert(&self, record: Record) -> String {
        let id = new_token();
        let mut map = self.0.sessions.lock().unwrap();
        self.evict(&mut map);
        map.insert(id.clone(), Entry { record: Arc::new(Mutex::new(record)), touched: Instant::now() });
        id
    }

    /// Adds the session's counter growth since the last call to the metrics.
    fn account(&self, r: &mut Record) {
        let now = r.session.counters();
        let fires = r.session.fire_counts().clone();
        let mut m = self.0.metrics.lock().unwrap();
        m.rules_fired += now.rules_fired.saturating_sub(r.seen.rules_fired);
        m.questions_asked += now.questions_asked.saturating_sub(r.seen.questions_asked);
        m.remote_calls += now.remote_calls.saturating_sub(r.seen.remote_calls);
        for (frame, n) in &fires {
            let old = r.seen_fires.get(frame).copied().unwrap_or(0);
            *m.rules_fired_by_frame.entry(frame.clone()).or_default() += n.saturating_sub(old);
        }
        r.seen = now;
        r.seen_fires = fires;
    }

    fn record(&self, session: InferenceSession, goal: String) -> Record {
        let now = unix_now();
        Record {
            seen: session.counters(),
            seen_fires: session.fire_counts().clone(),
            session,
            goal,
            state: SessionState::Running,
            step: Map::new(),
            applied: HashMap::new(),
            created: now,
            updated: now,
        }
    }

    /// Records the result of an inference step.
    fn settle(&self, r: &mut Record, step: Result<Outcome, InferenceError>) {
        let was_done = r.state == SessionState::Done;
        match step {
            Ok(o) => {
                r.state = if o.is_done() { SessionState::Done } else { SessionState::AwaitingAnswer };
                r.step = outcome_json(&o).as_object().cloned().unwrap_or_default();
            }
            Err(e) => {
                r.state = SessionState::Failed;
                r.step = Map::new();
                r.step.insert("error".into(), json!({ "code": e.code(), "message": e.to_string() }));
            }
        }
        if r.state == SessionState::Done && !was_done {
            self.0.metrics.lock().unwrap().sessions_completed += 1;
        }
        r.updated = unix_now();
        self.account(r);
    }

    fn view(id: &str, r: &Record) -> JsonValue {
        let mut m = Map::new();
        m.insert("session".into(), json!(id));
        m.insert("state".into(), json!(r.state));
        m.insert("goal".into(), json!(r.goal));
        m.insert("created".into(), json!(r.created));
        m.insert("updated".into(), json!(r.updated));
        m.extend(r.step.clone());
        JsonValue::Object(m)
    }

    fn start(&self, body: &str) -> Result<JsonValue, ApiError> {
        #[derive(Deserialize)]
        struct Start {
            goal: String,
        }
        let req: Start = serde_json::from_str(body)
            .map_err(|e| ApiError::new(StatusCode::BAD_REQUEST, "BadRequest", e.to_string()))?;
        let (frame, slot) = parse_goal(&req.goal).ok_or_else(|| {
            ApiError::new(StatusCode::BAD_REQUEST, "BadGoal", format!("goal `{}` is not Frame.slot", req.goal))
        })?;
        let mut r = self.record(self.0.engine.session(), req.goal.clone());
        let step = r.session.infer(frame, slot);
        if let Err(e @ (InferenceError::UnknownFrame(_) | InferenceError::UnknownSlot { .. })) = step {
            return Err(e.into());
        }
        self.0.metrics.lock().unwrap().sessions_started += 1;
        self.settle(&mut r, step);
        let view = Self::view("", &r);
        let id = self.insert(r);
        Ok(with_id(view, &id))
    }

    fn restore(&self, body: &str) -> Result<JsonValue, ApiError> {
        let snap = snapshot_from_xml(body)
            .map_err(|e| ApiError::new(StatusCode::BAD_REQUEST, "BadSnapshot", e.to_string()))?;
        let (frame, slot) = snap
            .goal
            .clone()
            .ok_or_else(|| ApiError::new(StatusCode::BAD_REQUEST, "BadSnapshot", "snapshot has no goal"))?;
        let session = InferenceSession::restore(&self.0.engine, &snap).map_err(|e| match e.code() {
            "WorldVersionMismatch" => ApiError::from(e),
            _ => ApiError::new(StatusCode::BAD_REQUEST, "BadSnapshot", e.to_string()),
        })?;
        let mut r = self.record(session, format!("{frame}.{slot}"));
        let step = match r.session.pending().cloned() {
            Some(q) => Ok(Outcome::Suspended(q)),
            None => r.session.infer(&frame, &slot),
        };
        self.0.metrics.lock().unwrap().sessions_started += 1;
        self.settle(&mut r, step);
        let view = Self::view("", &r);
        let id = self.insert(r);
        Ok(with_id(view, &id))
    }

    fn answer(&self, id: &str, body: &str) -> Result<JsonValue, ApiError> {
        #[derive(Deserialize)]
        struct Answer {
            question_id: String,
            value: JsonValue,
        }
        let req: Answer = serde_json::from_str(body)
            .map_err(|e| ApiError::new(StatusCode::BAD_REQUEST, "BadRequest", e.to_string()))?;
        let rec = self.lookup(id)?;
        let mut r = lock_record(&rec)?;
        if let Some((value, reply)) = r.applied.get(&req.question_id) {
            if *value == req.value {
                return Ok(reply.clone());
            }
        }
        if matches!(r.state, SessionState::Done | SessionState::Failed) {
            return Err(ApiError::new(StatusCode::CONFLICT, "SessionCompleted", "the consultation has finished"));
        }
        let q = r.session.pending().cloned().ok_or(InferenceError::NoPendingQuestion)?;
        if q.id != req.question_id {
            return Err(InferenceError::WrongQuestion { expected: q.id, found: req.question_id }.into());
        }
        let mismatch = || {
            ApiError::new(
                StatusCode::UNPROCESSABLE_ENTITY,
                "AnswerTypeMismatch",
                format!("expected {}, got {}", q.kind.name(), req.value),
            )
            .with("expected", json!(q.kind.name()))
        };
        let raw = raw_from_json(&req.value).ok_or_else(mismatch)?;
        let value = make_value(q.kind, raw).map_err(|_| mismatch())?;
        let step = r.session.answer(&q.id, value);
        let step = match step {
            Err(e @ (InferenceError::ConstraintViolation { .. } | InferenceError::AnswerTypeMismatch { .. })) => {
                if let Some(q) = r.session.pending().cloned() {
                    r.step = outcome_json(&Outcome::Suspended(q)).as_object().cloned().unwrap_or_default();
                }
                self.account(&mut r);
                return Err(e.into());
            }
            other => other,
        };
        self.settle(&mut r, step);
        let reply = Self::view(id, &r);
        r.applied.insert(q.id, (req.value, reply.clone()));
        Ok(reply)
    }
}

fn with_id(mut view: JsonValue, id: &str) -> JsonValue {
    view["session"] = json!(id);
    view
}

async fn blocking<T: Send + 'static>(f: impl FnOnce() -> Result<T, ApiError> + Send + 'static) -> Result<T, ApiError> {
    tokio::task::spawn_blocking(f)
        .await
        .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "Internal", e.to_string()))?
}

pub(crate) async fn create(
    State(svc): State<Service>,
    Query(query): Query<HashMap<String, String>>,
    body: String,
) -> Result<Response, ApiError> {
    let restore = query.contains_key("restore");
    let view = blocking(move || if restore { svc.restore(&body) } else { svc.start(&body) }).await?;
    Ok((StatusCode::CREATED, Json(view)).into_response())
}

pub(crate) async fn answer(State(svc): State<Service>, Path(id): Path<String>, body: String) -> Result<Json<JsonValue>, ApiError> {
    blocking(move || svc.answer(&id, &body)).await.map(Json)
}

pub(crate) async fn show(State(svc): State<Service>, Path(id): Path<String>) -> Result<Json<JsonValue>, ApiError> {
    let rec = svc.lookup(&id)?;
    let r = lock_record(&rec)?;
    Ok(Json(Service::view(&id, &r)))
}

pub(crate) async fn remove(State(svc): State<Service>, Path(id): Path<String>) -> Result<StatusCode, ApiError> {
    svc.lookup(&id)?;
    svc.0.sessions.lock().unwrap().remove(&id);
    Ok(StatusCode::NO_CONTENT)
}

pub(crate) async fn trace(State(svc): State<Service>, Path(id): Path<String>) -> Result<Json<JsonValue>, ApiError> {
    let rec = svc.lookup(&id)?;
    let r = lock_record(&rec)?;
    let events: Vec<JsonValue> = r.session.trace().iter().map(trace_event_json).collect();
    Ok(Json(json!({ "session": id, "trace": events })))
}

pub(crate) async fn snapshot(State(svc): State<Service>, Path(id): Path<String>) -> Result<Response, ApiError> {
    let rec = svc.lookup(&id)?;
    let r = lock_record(&rec)?;
    let xml = snapshot_to_xml(&r.session.snapshot());
    Ok(([(header::CONTENT_TYPE, "application/xml")], xml).into_response())
}

pub(crate) async fn metrics(State(svc): State<Service>) -> Json<Metrics> {
    Json(svc.metrics())
}

/// Frames with their visible slots.
pub(crate) async fn kb(State(svc): State<Service>) -> Json<JsonValue> {
    let world = svc.engine().world();
    let frames: Vec<JsonValue> = world
        .frames()
        .map(|f| {
            let mut seen = Vec::new();
            let mut slots = Vec::new();
            for level in world.ancestry(&f.name, None).unwrap_or_else(|_| vec![f.name.clone()]) {
                let Some(def) = world.frame(&level) else { continue };
                for s in def.slots.values() {
                    if seen.contains(&s.name) {
                        continue;
                    }
                    seen.push(s.name.clone());
                    slots.push(json!({
                        "name": s.name,
                        "kind": s.kind.name(),
                        "default": s.default.as_ref().map(value_to_json),
                        "frame": level,
                    }));
                }
            }
            let mut m = Map::new();
            m.insert("name".into(), json!(f.name));
            m.insert("parent".into(), json!(f.parent));
            let kind = match &f.kind {
                FrameKind::Local => "local",
                FrameKind::RemoteStub { url } => {
                    m.insert("url".into(), json!(url));
                    "remote"
                }
                FrameKind::Frameset { .. } => {
                    m.insert("members".into(), json!(world.member_count(&f.name)));
                    "frameset"
                }
                FrameKind::ExternalObject => "external",
            };
            m.insert("kind".into(), json!(kind));
            m.insert("slots".into(), json!(slots));
            JsonValue::Object(m)
        })
        .collect();
    Json(json!({ "version": world.version(), "frames": frames }))
}
