//! One live planning run whose queries are answered over the protocol.

use std::sync::mpsc;
use std::sync::{Arc, Mutex, MutexGuard};
use std::thread;
use std::time::Duration;

use pgplan_core::expert::ChannelKind;
use pgplan_core::preference::parse_preference;
use pgplan_core::{
    pg_search, Domain, ExpertChannel, ExpertResponse, ParseError, PlanStep, PreferenceStore,
    Problem, Query, RunStats, SearchEvent, SearchParams, State, Strategy, Task,
};
use serde::Serialize;
use serde_json::{json, Value};
use thiserror::Error;
use tokio::sync::watch;

use crate::protocol::{state_atoms, EventEncoder, TIMED_OUT, VERSION};

pub const DEFAULT_EXPERT_TIMEOUT: Duration = Duration::from_secs(120);

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Lifecycle {
    Created,
    Running,
    AwaitingExpert,
    Finished,
    Failed,
}

impl Lifecycle {
    pub fn is_terminal(self) -> bool {
        matches!(self, Lifecycle::Finished | Lifecycle::Failed)
    }
}

#[derive(Debug, Error)]
pub enum SessionError {
    #[error("unknown session {0}")]
    UnknownSession(String),
    #[error("session already started")]
    AlreadyStarted,
    #[error("session is not awaiting an answer")]
    NotAwaiting,
    #[error("invalid preference: {0}")]
    InvalidPreference(ParseError),
    #[error("invalid {what}: {source}")]
    Parse {
        what: &'static str,
        source: ParseError,
    },
    #[error("bad request: {0}")]
    BadRequest(String),
}

impl SessionError {
    pub fn kind(&self) -> &'static str {
        match self {
            SessionError::UnknownSession(_) => "unknown_session",
            SessionError::AlreadyStarted => "already_started",
            SessionError::NotAwaiting => "not_awaiting",
            SessionError::InvalidPreference(_) => "invalid_preference",
            SessionError::Parse { .. } => "parse_error",
            SessionError::BadRequest(_) => "bad_request",
        }
    }

    /// Extra error fields: the offending input and its position.
    pub fn details(&self) -> Value {
        let pos = match self {
            SessionError::InvalidPreference(e) | SessionError::Parse { source: e, .. } => e.pos(),
            _ => None,
        };
        let mut v = match pos {
            Some(p) => json!({ "line": p.line, "col": p.col }),
            None => json!({}),
        };
        if let SessionError::Parse { what, .. } = self {
            v["what"] = json!(what);
        }
        v
    }
}

/// Everything needed to run the search, fixed at creation.
pub struct SessionSpec {
    pub domain: Domain,
    pub problem: Problem,
    pub params: SearchParams,
    pub strategy: Strategy,
    pub store: PreferenceStore,
    pub expert_timeout: Duration,
    pub encoder: EventEncoder,
}

/// An expert's reply as submitted to `respond`.
#[derive(Clone, Debug, PartialEq)]
pub enum Reply {
    Preference(String),
    Decline,
}

struct Pending {
    query: Value,
    reply: mpsc::Sender<ExpertResponse>,
}

struct Inner {
    lifecycle: Lifecycle,
    events: Vec<Value>,
    node: Option<u64>,
    state: State,
    plan: Vec<PlanStep>,
    frontier: Option<(Task, usize, usize)>,
    pending: Option<Pending>,
    timed_out: bool,
    stats: Option<RunStats>,
}

pub struct Session {
    pub id: String,
    spec: SessionSpec,
    inner: Mutex<Inner>,
    tick: watch::Sender<usize>,
}

impl Session {
    pub fn new(id: String, spec: SessionSpec) -> Self {
        let frontier = spec
            .problem
            .initial_tasks
            .first()
            .map(|t| (t.clone(), 0, spec.problem.initial_tasks.len()));
        let inner = Inner {
            lifecycle: Lifecycle::Created,
            events: Vec::new(),
            node: None,
            state: spec.problem.initial_state.clone(),
            plan: Vec::new(),
            frontier,
            pending: None,
            timed_out: false,
            stats: None,
        };
        Session {
            id,
            spec,
            inner: Mutex::new(inner),
            tick: watch::channel(0).0,
        }
    }

    fn lock(&self) -> MutexGuard<'_, Inner> {
        self.inner.lock().unwrap_or_else(|e| e.into_inner())
    }

    pub fn lifecycle(&self) -> Lifecycle {
        self.lock().lifecycle
    }

    /// Launches the search on its own thread.
    pub fn start(self: &Arc<Self>) -> Result<(), SessionError> {
        {
            let mut inner = self.lock();
            if inner.lifecycle != Lifecycle::Created {
                return Err(SessionError::AlreadyStarted);
            }
            inner.lifecycle = Lifecycle::Running;
        }
        let me = Arc::clone(self);
        thread::spawn(move || me.run());
        Ok(())
    }

    fn run(self: Arc<Self>) {
        let spec = &self.spec;
        let mut store = spec.store.clone();
        let mut expert = HumanExpert { session: &self };
        let mut obs = |ev: &SearchEvent<'_>| self.observe(ev);
        let outcome = pg_search(
            &spec.domain,
            &spec.problem,
            &mut expert,
            &mut store,
            &spec.params,
            spec.strategy,
            Some(&mut obs),
        );
        let mut inner = self.lock();
        inner.lifecycle = if outcome.stats.solved {
            Lifecycle::Finished
        } else {
            Lifecycle::Failed
        };
        inner.frontier = None;
        let mut stats = outcome.stats;
        stats.trace.clear();
        inner.stats = Some(stats);
        let n = inner.events.len();
        drop(inner);
        self.tick.send_replace(n);
    }

    fn observe(&self, ev: &SearchEvent<'_>) {
        let mut inner = self.lock();
        if let SearchEvent::NodeExpanded {
            node,
            depth,
            state,
            task,
            plan,
            frontier_len,
        } = ev
        {
            inner.node = Some(*node);
            inner.state = (*state).clone();
            inner.plan = plan.to_vec();
            inner.frontier = Some(((*task).clone(), *depth, *frontier_len));
        }
        if let SearchEvent::PlanFound { plan } = ev {
            inner.plan = plan.steps.clone();
        }
        let mut value = self.spec.encoder.encode(ev);
        if matches!(ev, SearchEvent::QueryDeclined { .. }) && std::mem::take(&mut inner.timed_out) {
            value["reason"] = json!(TIMED_OUT);
        }
        inner.events.push(value);
        let n = inner.events.len();
        drop(inner);
        self.tick.send_replace(n);
    }

    /// Hands an answer to the suspended search. A malformed preference is
    /// rejected and the query stays pending.
    pub fn respond(&self, reply: Reply) -> Result<(), SessionError> {
        let response = match &reply {
            Reply::Preference(text) => ExpertResponse::Preference(
                parse_preference(text, &self.spec.domain)
                    .map_err(SessionError::InvalidPreference)?,
            ),
            Reply::Decline => ExpertResponse::Decline,
        };
        let mut inner = self.lock();
        let pending = inner.pending.take().ok_or(SessionError::NotAwaiting)?;
        inner.lifecycle = Lifecycle::Running;
        // The search thread owns the receiver until it gives up on the
        // query, and it only gives up after clearing `pending` under this
        // lock, so the send cannot fail here.
        let _ = pending.reply.send(response);
        Ok(())
    }

    /// Events from index `from` on, and whether the run has ended.
    pub fn events_from(&self, from: usize) -> (Vec<Value>, bool) {
        let inner = self.lock();
        let batch = inner
            .events
            .get(from..)
            .map(<[Value]>::to_vec)
            .unwrap_or_default();
        (batch, inner.lifecycle.is_terminal())
    }

    pub fn subscribe(&self) -> watch::Receiver<usize> {
        self.tick.subscribe()
    }

    pub fn snapshot(&self) -> Value {
        let inner = self.lock();
        let frontier = inner
            .frontier
            .as_ref()
            .map(|(t, d, n)| json!({ "top": t.to_string(), "depth": d, "len": n }));
        let result = inner.stats.as_ref().map(|s| {
            json!({
                "solved": s.solved,
                "reason": s.reason.map(|r| r.to_string()),
                "plan_len": s.plan_len,
                "queries": s.queries_issued,
                "prefs": s.prefs_acquired,
                "nodes": s.nodes_expanded,
                "wall_ms": s.wall_ms,
            })
        });
        json!({
            "v": VERSION,
            "session": self.id,
            "lifecycle": inner.lifecycle,
            "node": inner.node,
            "state": state_atoms(&inner.state),
            "plan": inner.plan.iter().map(ToString::to_string).collect::<Vec<_>>(),
            "frontier": frontier,
            "query": inner.pending.as_ref().map(|p| p.query.clone()),
            "events": inner.events.len(),
            "result": result,
        })
    }
}

/// Forwards queries to whoever is attached to the session and blocks until
/// they answer or the expert timeout passes.
struct HumanExpert<'s> {
    session: &'s Session,
}

impl ExpertChannel for HumanExpert<'_> {
    fn kind(&self) -> ChannelKind {
        ChannelKind::Human
    }

    fn answer(&mut self, query: &Query) -> ExpertResponse {
        let s = self.session;
        let (tx, rx) = mpsc::channel();
        {
            let mut inner = s.lock();
            inner.pending = Some(Pending {
                query: s.spec.encoder.query(query),
                reply: tx,
            });
            inner.lifecycle = Lifecycle::AwaitingExpert;
        }
        let n = s.lock().events.len();
        s.tick.send_replace(n);
        match rx.recv_timeout(s.spec.expert_timeout) {
            Ok(response) => response,
            Err(_) => {
                let mut inner = s.lock();
                if inner.pending.take().is_some() {
                    inner.lifecycle = Lifecycle::Running;
                    inner.timed_out = true;
                    ExpertResponse::Decline
                } else {
                    // An answer arrived between the timeout and the lock.
                    drop(inner);
                    rx.recv().unwrap_or(ExpertResponse::Decline)
                }
            }
        }
    }
}
