//! The v:1 JSON wire format: events, snapshots and error bodies.

use pgplan_core::{
    pg_search, Domain, ExpertChannel, MethodScore, NodeTrace, PreferenceStore, Problem, Query,
    SearchEvent, SearchOutcome, SearchParams, State, Strategy,
};
use serde_json::{json, Map, Value};

pub const VERSION: u64 = 1;

/// Why a query ended without a preference.
pub const DECLINED: &str = "declined";
pub const TIMED_OUT: &str = "timeout";

/// A float rounded to 9 significant digits; non-finite values become null.
pub fn num(x: f64) -> Value {
    if !x.is_finite() {
        return Value::Null;
    }
    let rounded: f64 = format!("{x:.8e}")
        .parse()
        .expect("formatted float reparses");
    json!(rounded)
}

pub fn state_atoms(state: &State) -> Vec<String> {
    state.iter().map(ToString::to_string).collect()
}

/// Turns search events into wire events. With `blind` set, per-method
/// scores, probabilities and entropies are withheld from the expert.
#[derive(Clone, Copy, Debug, Default)]
pub struct EventEncoder {
    pub blind: bool,
}

fn event(kind: &str, fields: Value) -> Value {
    let mut m = Map::new();
    m.insert("v".into(), json!(VERSION));
    m.insert("type".into(), json!(kind));
    if let Value::Object(f) = fields {
        m.extend(f);
    }
    Value::Object(m)
}

impl EventEncoder {
    pub fn methods(&self, scores: &[MethodScore]) -> Value {
        scores
            .iter()
            .map(|s| {
                if self.blind {
                    json!({ "id": s.method_id, "label": s.label })
                } else {
                    json!({
                        "id": s.method_id,
                        "label": s.label,
                        "L": s.plan_len,
                        "D": s.distance,
                        "A": s.adherence,
                        "score": num(s.score),
                        "p": num(s.probability),
                    })
                }
            })
            .collect()
    }

    /// The body of a pending query, as carried by `query_posed` and by
    /// snapshots.
    pub fn query(&self, q: &Query) -> Value {
        let mut v = json!({
            "node": q.node_id,
            "depth": q.node_depth,
            "state": state_atoms(&q.state),
            "task": q.task.to_string(),
            "methods": self.methods(&q.candidates),
        });
        if !self.blind {
            v["entropy"] = num(q.entropy);
        }
        v
    }

    fn evaluated(&self, t: &NodeTrace) -> Value {
        let mut v = json!({
            "node": t.node,
            "depth": t.depth,
            "task": t.task,
            "methods": self.methods(&t.methods),
            "queried": t.queried,
            "answered": t.answered,
            "chosen": t.chosen,
        });
        if !self.blind {
            v["entropy"] = num(t.entropy);
        }
        v
    }

    pub fn encode(&self, ev: &SearchEvent<'_>) -> Value {
        match ev {
            SearchEvent::NodeExpanded {
                node,
                depth,
                task,
                plan,
                frontier_len,
                ..
            } => event(
                "node_expanded",
                json!({ "node": node, "depth": depth, "task": task.to_string(), "plan_len": plan.len(), "frontier": frontier_len }),
            ),
            SearchEvent::QueryPosed { query } => event("query_posed", self.query(query)),
            SearchEvent::PreferenceReceived {
                node,
                preference,
                added,
            } => event(
                "preference_received",
                json!({ "node": node, "id": preference.id.as_str(), "preference": preference.to_string(), "added": added }),
            ),
            SearchEvent::QueryDeclined { node } => event(
                "query_declined",
                json!({ "node": node, "reason": DECLINED }),
            ),
            SearchEvent::NodeEvaluated { trace } => event("node_evaluated", self.evaluated(trace)),
            SearchEvent::PlanFound { plan } => event(
                "plan_found",
                json!({ "plan": plan.steps.iter().map(ToString::to_string).collect::<Vec<_>>(), "plan_len": plan.len() }),
            ),
            SearchEvent::Failed { reason } => {
                event("failed", json!({ "reason": reason.to_string() }))
            }
        }
    }
}

/// Runs a search in-process and records the wire events it would stream.
pub fn run_recorded(
    domain: &Domain,
    problem: &Problem,
    expert: &mut dyn ExpertChannel,
    store: &mut PreferenceStore,
    params: &SearchParams,
    strategy: Strategy,
    encoder: EventEncoder,
) -> (SearchOutcome, Vec<Value>) {
    let mut events = Vec::new();
    let mut obs = |ev: &SearchEvent<'_>| events.push(encoder.encode(ev));
    let outcome = pg_search(
        domain,
        problem,
        expert,
        store,
        params,
        strategy,
        Some(&mut obs),
    );
    (outcome, events)
}

pub fn error_body(kind: &str, message: &str, extra: Value) -> Value {
    let mut err = json!({ "kind": kind, "message": message });
    if let (Value::Object(e), Value::Object(x)) = (&mut err, extra) {
        e.extend(x);
    }
    json!({ "v": VERSION, "error": err })
}
