//! HTTP service exposing live planning sessions to a human expert.
//!
//! Endpoints (all bodies JSON with `"v": 1`):
//!
//! - `POST /sessions` creates a session from domain and problem text.
//! - `POST /sessions/{id}/start` launches the search.
//! - `GET /sessions/{id}/snapshot` returns the latest state, plan and any pending query.
//! - `GET /sessions/{id}/events?from=N` streams events as server-sent events.
//! - `POST /sessions/{id}/respond` answers the pending query with a preference or a decline.

pub mod protocol;
pub mod session;

use std::collections::HashMap;
use std::convert::Infallible;
use std::sync::{Arc, RwLock};
use std::time::Duration;

use axum::body::Bytes;
use axum::extract::{Path, Query, State};
use axum::http::StatusCode;
use axum::response::sse::{Event, KeepAlive, Sse};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use futures_util::stream::{self, Stream, StreamExt};
use pgplan_core::preference::parse_preference_list;
use pgplan_core::{
    parse_domain, parse_problem, Origin, Preference, PreferenceStore, SearchParams, Strategy,
};
use serde::Deserialize;
use serde_json::{json, Value};
use tokio::net::TcpListener;

pub use protocol::{num, run_recorded, EventEncoder};
pub use session::{Lifecycle, Reply, Session, SessionError, SessionSpec, DEFAULT_EXPERT_TIMEOUT};

#[derive(Clone, Debug)]
pub struct ServiceConfig {
    /// Withhold method scores, probabilities and entropies from the expert.
    pub blind_console: bool,
    pub expert_timeout: Duration,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        ServiceConfig {
            blind_console: false,
            expert_timeout: DEFAULT_EXPERT_TIMEOUT,
        }
    }
}

#[derive(Clone)]
struct AppState {
    sessions: Arc<RwLock<HashMap<String, Arc<Session>>>>,
    config: Arc<ServiceConfig>,
}

impl AppState {
    fn session(&self, id: &str) -> Result<Arc<Session>, SessionError> {
        let map = self.sessions.read().unwrap_or_else(|e| e.into_inner());
        map.get(id)
            .cloned()
            .ok_or_else(|| SessionError::UnknownSession(id.to_string()))
    }
}

impl IntoResponse for SessionError {
    fn into_response(self) -> Response {
        let status = match self {
            SessionError::UnknownSession(_) => StatusCode::NOT_FOUND,
            SessionError::AlreadyStarted | SessionError::NotAwaiting => StatusCode::CONFLICT,
            SessionError::InvalidPreference(_) | SessionError::Parse { .. } => {
                StatusCode::UNPROCESSABLE_ENTITY
            }
            SessionError::BadRequest(_) => StatusCode::BAD_REQUEST,
        };
        let body = protocol::error_body(self.kind(), &self.to_string(), self.details());
        (status, Json(body)).into_response()
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct CreateRequest {
    #[serde(default)]
    v: Option<u64>,
    domain: String,
    problem: String,
    #[serde(default)]
    params: SearchParams,
    #[serde(default)]
    strategy: Option<String>,
    /// Preferences in effect from the start, in the upfront file format.
    #[serde(default)]
    prefs: Option<String>,
    #[serde(default)]
    expert_timeout_secs: Option<f64>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RespondRequest {
    #[serde(default)]
    v: Option<u64>,
    #[serde(default)]
    preference: Option<String>,
    #[serde(default)]
    decline: bool,
}

fn parse_body<T: for<'de> Deserialize<'de>>(body: &Bytes) -> Result<T, SessionError> {
    serde_json::from_slice(body).map_err(|e| SessionError::BadRequest(e.to_string()))
}

fn check_version(v: Option<u64>) -> Result<(), SessionError> {
    match v {
        None | Some(protocol::VERSION) => Ok(()),
        Some(other) => Err(SessionError::BadRequest(format!(
            "unsupported protocol version {other}"
        ))),
    }
}

fn build_spec(req: CreateRequest, config: &ServiceConfig) -> Result<SessionSpec, SessionError> {
    check_version(req.v)?;
    let domain = parse_domain(&req.domain).map_err(|source| SessionError::Parse {
        what: "domain",
        source,
    })?;
    let problem = parse_problem(&req.problem, &domain).map_err(|source| SessionError::Parse {
        what: "problem",
        source,
    })?;
    if !(req.params.temperature > 0.0 && req.params.temperature.is_finite()) {
        return Err(SessionError::BadRequest(
            "temperature must be positive".into(),
        ));
    }
    let strategy = match req.strategy.as_deref() {
        None => Strategy::Active,
        Some(s) => s.parse::<Strategy>().map_err(SessionError::BadRequest)?,
    };
    let store = match &req.prefs {
        None => PreferenceStore::new(),
        Some(text) => {
            let prefs =
                parse_preference_list(text, &domain).map_err(|source| SessionError::Parse {
                    what: "prefs",
                    source,
                })?;
            let prefs = prefs
                .into_iter()
                .map(|p| Preference {
                    origin: Origin::Upfront,
                    ..p
                })
                .collect();
            PreferenceStore::from_prefs(prefs)
                .map_err(|e| SessionError::BadRequest(e.to_string()))?
        }
    };
    let expert_timeout = match req.expert_timeout_secs {
        None => config.expert_timeout,
        Some(s) => {
            Duration::try_from_secs_f64(s).map_err(|e| SessionError::BadRequest(e.to_string()))?
        }
    };
    Ok(SessionSpec {
        domain,
        problem,
        params: req.params,
        strategy,
        store,
        expert_timeout,
        encoder: EventEncoder {
            blind: config.blind_console,
        },
    })
}

async fn create(State(app): State<AppState>, body: Bytes) -> Result<Response, SessionError> {
    let spec = build_spec(parse_body(&body)?, &app.config)?;
    let id = uuid::Uuid::new_v4().simple().to_string();
    let session = Arc::new(Session::new(id.clone(), spec));
    app.sessions
        .write()
        .unwrap_or_else(|e| e.into_inner())
        .insert(id.clone(), session);
    let body = json!({ "v": protocol::VERSION, "session": id, "lifecycle": Lifecycle::Created });
    Ok((StatusCode::CREATED, Json(body)).into_response())
}

async fn start(
    State(app): State<AppState>,
    Path(id): Path<String>,
) -> Result<Json<Value>, SessionError> {
    let session = app.session(&id)?;
    session.start()?;
    Ok(Json(
        json!({ "v": protocol::VERSION, "session": id, "lifecycle": session.lifecycle() }),
    ))
}

async fn snapshot(
    State(app): State<AppState>,
    Path(id): Path<String>,
) -> Result<Json<Value>, SessionError> {
    Ok(Json(app.session(&id)?.snapshot()))
}

async fn respond(
    State(app): State<AppState>,
    Path(id): Path<String>,
    body: Bytes,
) -> Result<Json<Value>, SessionError> {
    let session = app.session(&id)?;
    let req: RespondRequest = parse_body(&body)?;
    check_version(req.v)?;
    let reply = match (req.preference, req.decline) {
        (Some(text), false) => Reply::Preference(text),
        (None, true) => Reply::Decline,
        _ => {
            return Err(SessionError::BadRequest(
                "give exactly one of \"preference\" or \"decline\": true".into(),
            ))
        }
    };
    session.respond(reply)?;
    Ok(Json(
        json!({ "v": protocol::VERSION, "ack": true, "lifecycle": session.lifecycle() }),
    ))
}

#[derive(Deserialize)]
struct EventsQuery {
    #[serde(default)]
    from: usize,
}

/// Every event from index `from`, in order, ending once the run has ended
/// and its last event was sent.
pub fn event_stream(session: Arc<Session>, from: usize) -> impl Stream<Item = (usize, Value)> {
    let rx = session.subscribe();
    stream::unfold(
        (session, rx, from, false),
        |(session, mut rx, next, ended)| async move {
            if ended {
                return None;
            }
            loop {
                rx.borrow_and_update();
                let (batch, done) = session.events_from(next);
                if !batch.is_empty() {
                    let items: Vec<(usize, Value)> = batch
                        .into_iter()
                        .enumerate()
                        .map(|(i, v)| (next + i, v))
                        .collect();
                    let after = next + items.len();
                    return Some((stream::iter(items), (session, rx, after, false)));
                }
                if done {
                    return None;
                }
                if rx.changed().await.is_err() {
                    let (batch, _) = session.events_from(next);
                    let items: Vec<(usize, Value)> = batch
                        .into_iter()
                        .enumerate()
                        .map(|(i, v)| (next + i, v))
                        .collect();
                    let after = next + items.len();
                    return Some((stream::iter(items), (session, rx, after, true)));
                }
            }
        },
    )
    .flatten()
}

async fn events(
    State(app): State<AppState>,
    Path(id): Path<String>,
    Query(q): Query<EventsQuery>,
) -> Result<Sse<impl Stream<Item = Result<Event, Infallible>>>, SessionError> {
    let session = app.session(&id)?;
    let stream = event_stream(session, q.from).map(|(i, v)| {
        let kind = v
            .get("type")
            .and_then(Value::as_str)
            .unwrap_or("event")
            .to_string();
        Ok(Event::default()
            .id(i.to_string())
            .event(kind)
            .data(v.to_string()))
    });
    Ok(Sse::new(stream).keep_alive(KeepAlive::default()))
}

pub fn router(config: ServiceConfig) -> Router {
    let state = AppState {
        sessions: Arc::default(),
        config: Arc::new(config),
    };
    Router::new()
        .route("/sessions", post(create))
        .route("/sessions/{id}/start", post(start))
        .route("/sessions/{id}/snapshot", get(snapshot))
        .route("/sessions/{id}/events", get(events))
        .route("/sessions/{id}/respond", post(respond))
        .with_state(state)
}

/// Serves the session API on `listener` until the process ends.
pub async fn serve(listener: TcpListener, config: ServiceConfig) -> std::io::Result<()> {
    axum::serve(listener, router(config)).await
}
