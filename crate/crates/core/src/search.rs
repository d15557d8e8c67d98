//! Preference-guided HTN search.
//!
//! Depth-first decomposition of a task stack with chronological
//! backtracking. At every compound task the admissible methods are rolled
//! out, scored against the preference store, and turned into a Boltzmann
//! distribution; when that distribution's entropy exceeds the threshold the
//! expert is asked for a preference and the node is re-scored. Methods are
//! then tried in descending probability.

use std::collections::hash_map::DefaultHasher;
use std::collections::{BTreeSet, HashSet};
use std::fmt;
use std::hash::{Hash, Hasher};
use std::rc::Rc;
use std::str::FromStr;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::domain::{
    admissible_methods, apply_task, Candidate, Domain, Plan, PlanStep, Problem, Task, TaskNetwork,
};
use crate::error::PolicyError;
use crate::expert::{ExpertChannel, ExpertResponse, Query};
use crate::policy::{score_method, MethodScore, Policy, DEAD_END};
use crate::preference::{
    adherence, applicable_preferences, Origin, Preference, PreferenceStore, UsageRecord,
};
use crate::rollout::{rollout, RolloutResult};
use crate::state::{goal_distance, State};
use crate::term::{Atom, Ident};

/// When the planner asks the expert.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Strategy {
    /// Ask when entropy exceeds the threshold.
    Active,
    /// Never ask; preferences were supplied before planning.
    Upfront,
    /// Ask with a fixed probability at every compound node.
    Random { prob: f64 },
    /// Never ask.
    None,
}

impl Strategy {
    pub fn name(&self) -> &'static str {
        match self {
            Strategy::Active => "active",
            Strategy::Upfront => "upfront",
            Strategy::Random { .. } => "random",
            Strategy::None => "none",
        }
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

pub const DEFAULT_RANDOM_QUERY_PROB: f64 = 0.1;

impl FromStr for Strategy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "active" => Ok(Strategy::Active),
            "upfront" => Ok(Strategy::Upfront),
            "random" => Ok(Strategy::Random {
                prob: DEFAULT_RANDOM_QUERY_PROB,
            }),
            "none" => Ok(Strategy::None),
            _ => Err(format!(
                "unknown strategy {s:?} (expected active, upfront, random or none)"
            )),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SearchParams {
    pub rollout_depth: usize,
    pub entropy_threshold: f64,
    pub temperature: f64,
    /// Base of the entropy logarithm; `e` gives nats.
    pub entropy_base: f64,
    pub max_decomposition_depth: usize,
    #[serde(with = "duration_secs")]
    pub time_budget: Duration,
    pub rng_seed: u64,
    pub max_queries: Option<usize>,
    /// Sample the method exploration order from the policy instead of
    /// sorting by probability.
    pub sample_methods: bool,
    pub trace: bool,
}

impl Default for SearchParams {
    fn default() -> Self {
        SearchParams {
            rollout_depth: 3,
            entropy_threshold: 0.5,
            temperature: 1.0,
            entropy_base: std::f64::consts::E,
            max_decomposition_depth: 200,
            time_budget: Duration::from_secs(600),
            rng_seed: 0,
            max_queries: None,
            sample_methods: false,
            trace: false,
        }
    }
}

mod duration_secs {
    use serde::{Deserialize, Deserializer, Serializer};
    use std::time::Duration;

    pub fn serialize<S: Serializer>(d: &Duration, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_f64(d.as_secs_f64())
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Duration, D::Error> {
        let secs = f64::deserialize(d)?;
        Duration::try_from_secs_f64(secs).map_err(serde::de::Error::custom)
    }
}

/// An HTN node: a task to solve in a state, with the plan prefix that led
/// there.
#[derive(Clone, Debug, PartialEq)]
pub struct SearchNode {
    pub state: State,
    pub task: Task,
    pub depth: usize,
    pub partial_plan: Vec<PlanStep>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UnsolvedReason {
    Timeout,
    Exhausted,
    DepthCap,
}

impl fmt::Display for UnsolvedReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            UnsolvedReason::Timeout => "timeout",
            UnsolvedReason::Exhausted => "exhausted",
            UnsolvedReason::DepthCap => "depth_cap",
        })
    }
}

/// One evaluated compound node, as written by trace mode.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NodeTrace {
    pub node: u64,
    pub depth: usize,
    pub state_hash: String,
    pub task: String,
    pub methods: Vec<MethodScore>,
    /// Entropy of the policy the methods were explored under.
    pub entropy: f64,
    /// Entropy before any query at this node; the value the gate tests.
    pub pre_query_entropy: f64,
    pub queried: bool,
    pub answered: bool,
    pub chosen: String,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct RunStats {
    pub problem: String,
    pub strategy: String,
    pub solved: bool,
    pub reason: Option<UnsolvedReason>,
    pub plan_len: usize,
    pub wall_ms: u64,
    pub nodes_expanded: u64,
    pub queries_issued: usize,
    pub prefs_acquired: usize,
    pub max_depth: usize,
    pub usage: Vec<UsageRecord>,
    #[serde(skip_serializing_if = "Vec::is_empty", default)]
    pub trace: Vec<NodeTrace>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Solution {
    pub plan: Plan,
    pub network: TaskNetwork,
}

#[derive(Clone, Debug)]
pub struct SearchOutcome {
    pub result: Result<Solution, UnsolvedReason>,
    pub stats: RunStats,
}

impl SearchOutcome {
    pub fn plan(&self) -> Option<&Plan> {
        self.result.as_ref().ok().map(|s| &s.plan)
    }
}

/// Progress notifications, in the order they happen.
#[derive(Debug)]
pub enum SearchEvent<'a> {
    NodeExpanded {
        node: u64,
        depth: usize,
        state: &'a State,
        task: &'a Task,
        plan: &'a [PlanStep],
        frontier_len: usize,
    },
    QueryPosed {
        query: &'a Query,
    },
    PreferenceReceived {
        node: u64,
        preference: &'a Preference,
        added: bool,
    },
    QueryDeclined {
        node: u64,
    },
    NodeEvaluated {
        trace: &'a NodeTrace,
    },
    PlanFound {
        plan: &'a Plan,
    },
    Failed {
        reason: UnsolvedReason,
    },
}

pub type Observer<'o> = &'o mut dyn FnMut(&SearchEvent<'_>);

/// Rolls out every candidate at a node.
pub fn rollouts(
    state: &State,
    cands: &[Candidate<'_>],
    domain: &Domain,
    goal: &BTreeSet<Atom>,
    depth: usize,
) -> Vec<RolloutResult> {
    cands
        .iter()
        .map(|c| rollout(state, c, depth, domain, goal))
        .collect()
}

/// Scores candidates given fixed rollout results and the applicable
/// preferences. `skip` drops one preference from the adherence count.
fn score_node(
    state: &State,
    task: &Task,
    cands: &[Candidate<'_>],
    rolls: &[RolloutResult],
    store: &PreferenceStore,
    params: &SearchParams,
    skip: Option<&Ident>,
) -> Result<Policy, PolicyError> {
    if cands.is_empty() {
        return Err(PolicyError::NoAdmissibleMethods);
    }
    let applicable: Vec<&Preference> = applicable_preferences(store, state, task)
        .into_iter()
        .map(|(p, _)| p)
        .filter(|p| Some(&p.id) != skip)
        .collect();
    let scores = cands
        .iter()
        .zip(rolls)
        .map(|(c, r)| {
            let a = adherence(c.method.id.as_str(), applicable.iter().copied());
            MethodScore {
                method_id: c.method.id.to_string(),
                label: c.label(),
                plan_len: r.plan_len,
                distance: r.distance,
                adherence: a,
                score: if r.dead_end {
                    DEAD_END
                } else {
                    score_method(r.plan_len, r.distance, a)
                },
                probability: 0.0,
                dead_end: r.dead_end,
            }
        })
        .collect();
    Policy::from_scores(scores, params.temperature, params.entropy_base)
}

/// Evaluates a compound node: rollouts, adherence, scores, distribution
/// and entropy.
pub fn eval_node(
    node: &SearchNode,
    domain: &Domain,
    goal: &BTreeSet<Atom>,
    store: &PreferenceStore,
    params: &SearchParams,
) -> Result<Policy, PolicyError> {
    let cands = admissible_methods(&node.state, &node.task, domain);
    let rolls = rollouts(&node.state, &cands, domain, goal, params.rollout_depth);
    score_node(&node.state, &node.task, &cands, &rolls, store, params, None)
}

/// Whether the strategy asks the expert at a node with this policy.
pub fn should_query(
    policy: &Policy,
    params: &SearchParams,
    strategy: Strategy,
    rng: &mut impl Rng,
) -> bool {
    match strategy {
        Strategy::Active => policy.entropy > params.entropy_threshold,
        Strategy::Random { prob } => rng.random_bool(prob.clamp(0.0, 1.0)),
        Strategy::Upfront | Strategy::None => false,
    }
}

struct Cell {
    task: Task,
    net_id: usize,
    next: Frontier,
    hash: u64,
    len: usize,
}

/// Persistent task stack.
#[derive(Clone, Default)]
struct Frontier(Option<Rc<Cell>>);

impl Frontier {
    fn push(&self, task: Task, net_id: usize) -> Frontier {
        let mut h = DefaultHasher::new();
        task.hash(&mut h);
        self.hash().hash(&mut h);
        Frontier(Some(Rc::new(Cell {
            task,
            net_id,
            next: self.clone(),
            hash: h.finish(),
            len: self.len() + 1,
        })))
    }

    fn pop(&self) -> Option<(&Task, usize, &Frontier)> {
        self.0.as_ref().map(|c| (&c.task, c.net_id, &c.next))
    }

    fn hash(&self) -> u64 {
        self.0.as_ref().map_or(0, |c| c.hash)
    }

    fn len(&self) -> usize {
        self.0.as_ref().map_or(0, |c| c.len)
    }
}

enum Stop {
    Timeout,
}

struct Searcher<'a, 'o> {
    domain: &'a Domain,
    problem: &'a Problem,
    params: &'a SearchParams,
    strategy: Strategy,
    store: &'a mut PreferenceStore,
    expert: &'a mut dyn ExpertChannel,
    observer: Option<Observer<'o>>,
    rng: ChaCha8Rng,
    start: Instant,
    expert_wait: Duration,
    next_node: u64,
    next_net: usize,
    path: HashSet<u64>,
    plan: Vec<PlanStep>,
    net_nodes: Vec<(usize, Task)>,
    net_edges: Vec<(usize, usize)>,
    depth_cap_hit: bool,
    stats: RunStats,
}

impl<'a, 'o> Searcher<'a, 'o> {
    fn emit(&mut self, ev: SearchEvent<'_>) {
        if let Some(obs) = self.observer.as_mut() {
            obs(&ev);
        }
    }

    fn out_of_time(&self) -> bool {
        self.start.elapsed().saturating_sub(self.expert_wait) > self.params.time_budget
    }

    fn fingerprint(state: &State, frontier: &Frontier) -> u64 {
        let mut h = DefaultHasher::new();
        state.hash(&mut h);
        frontier.hash().hash(&mut h);
        h.finish()
    }

    fn recur(&mut self, state: &State, frontier: &Frontier, depth: usize) -> Result<bool, Stop> {
        if self.out_of_time() {
            return Err(Stop::Timeout);
        }
        let Some((task, net_id, rest)) = frontier.pop() else {
            return Ok(goal_distance(state, &self.problem.goal) == 0);
        };
        if depth > self.params.max_decomposition_depth {
            self.depth_cap_hit = true;
            return Ok(false);
        }
        let key = Self::fingerprint(state, frontier);
        if !self.path.insert(key) {
            return Ok(false);
        }
        let node = self.next_node;
        self.next_node += 1;
        self.stats.nodes_expanded += 1;
        self.stats.max_depth = self.stats.max_depth.max(depth);
        if self.observer.is_some() {
            let plan = std::mem::take(&mut self.plan);
            self.emit(SearchEvent::NodeExpanded {
                node,
                depth,
                state,
                task,
                plan: &plan,
                frontier_len: frontier.len(),
            });
            self.plan = plan;
        }

        let result = if task.is_primitive() {
            match apply_task(state, self.domain, task) {
                Ok(next) => {
                    self.plan
                        .push(PlanStep::from_task(task).expect("frontier tasks are ground"));
                    let found = self.recur(&next, rest, depth + 1);
                    if !matches!(found, Ok(true)) {
                        self.plan.pop();
                    }
                    found
                }
                Err(_) => Ok(false),
            }
        } else {
            self.expand(node, state, task, net_id, rest, depth)
        };
        self.path.remove(&key);
        result
    }

    fn expand(
        &mut self,
        node: u64,
        state: &State,
        task: &Task,
        net_id: usize,
        rest: &Frontier,
        depth: usize,
    ) -> Result<bool, Stop> {
        let domain = self.domain;
        let cands = admissible_methods(state, task, domain);
        if cands.is_empty() {
            return Ok(false);
        }
        let rolls = rollouts(
            state,
            &cands,
            domain,
            &self.problem.goal,
            self.params.rollout_depth,
        );
        let mut policy = score_node(state, task, &cands, &rolls, self.store, self.params, None)
            .expect("candidates are nonempty and temperature validated");
        let pre_query_entropy = policy.entropy;

        let budget_left = self
            .params
            .max_queries
            .is_none_or(|m| self.stats.queries_issued < m);
        let mut queried = false;
        let mut answered = false;
        if budget_left && should_query(&policy, self.params, self.strategy, &mut self.rng) {
            queried = true;
            self.stats.queries_issued += 1;
            let query = Query {
                node_id: node,
                state: state.clone(),
                task: task.clone(),
                candidates: policy.scores.clone(),
                entropy: policy.entropy,
                node_depth: depth,
            };
            self.emit(SearchEvent::QueryPosed { query: &query });
            let asked = Instant::now();
            let response = self.expert.answer(&query);
            self.expert_wait += asked.elapsed();
            match response {
                ExpertResponse::Preference(pref) => {
                    answered = true;
                    let (pref, added) = self.admit(pref, depth);
                    self.emit(SearchEvent::PreferenceReceived {
                        node,
                        preference: &pref,
                        added,
                    });
                    policy = score_node(state, task, &cands, &rolls, self.store, self.params, None)
                        .expect("rescoring cannot fail after a successful scoring");
                }
                ExpertResponse::Decline => self.emit(SearchEvent::QueryDeclined { node }),
            }
        }

        if cands.len() > 1 {
            self.record_usage(state, task, &cands, &rolls, &policy, depth);
        }

        let order = if self.params.sample_methods {
            self.sampled_order(&policy)
        } else {
            policy.exploration_order()
        };
        let trace = NodeTrace {
            node,
            depth,
            state_hash: format!("{:016x}", state.fingerprint()),
            task: task.to_string(),
            methods: policy.scores.clone(),
            entropy: policy.entropy,
            pre_query_entropy,
            queried,
            answered,
            chosen: policy.scores[order[0]].label.clone(),
        };
        self.emit(SearchEvent::NodeEvaluated { trace: &trace });
        if self.params.trace {
            self.stats.trace.push(trace);
        }

        for i in order {
            let subtasks = cands[i].subtasks();
            let mark = (self.net_nodes.len(), self.net_edges.len());
            let mut next = rest.clone();
            let mut ids = Vec::with_capacity(subtasks.len());
            for t in &subtasks {
                let id = self.next_net;
                self.next_net += 1;
                self.net_nodes.push((id, t.clone()));
                self.net_edges.push((net_id, id));
                ids.push(id);
            }
            for (t, id) in subtasks.into_iter().zip(ids).rev() {
                next = next.push(t, id);
            }
            if self.recur(state, &next, depth + 1)? {
                return Ok(true);
            }
            self.net_nodes.truncate(mark.0);
            self.net_edges.truncate(mark.1);
        }
        Ok(false)
    }

    /// Adds an expert answer to the store. An identical statement already
    /// present is not re-added; a clashing id gets a numeric suffix.
    fn admit(&mut self, mut pref: Preference, depth: usize) -> (Preference, bool) {
        pref.origin = Origin::Elicited { depth };
        if self.store.prefs().iter().any(|p| p.same_content(&pref)) {
            return (pref, false);
        }
        let base = pref.id.clone();
        let mut n = 2;
        while self.store.get(pref.id.as_str()).is_some() {
            pref.id = Ident::new(&format!("{base}-{n}"));
            n += 1;
        }
        self.store.add(pref.clone()).expect("id made unique above");
        self.stats.prefs_acquired += 1;
        (pref, true)
    }

    /// Logs each applicable preference, marking it influential when
    /// removing it alone would change the set of top-ranked methods.
    fn record_usage(
        &mut self,
        state: &State,
        task: &Task,
        cands: &[Candidate<'_>],
        rolls: &[RolloutResult],
        policy: &Policy,
        depth: usize,
    ) {
        let ids: Vec<Ident> = applicable_preferences(self.store, state, task)
            .into_iter()
            .map(|(p, _)| p.id.clone())
            .collect();
        let chosen = policy.argmax_set();
        for id in ids {
            let without = score_node(
                state,
                task,
                cands,
                rolls,
                self.store,
                self.params,
                Some(&id),
            )
            .expect("rescoring cannot fail after a successful scoring");
            let influenced = without.argmax_set() != chosen;
            self.store
                .record_usage(id.as_str(), depth, influenced)
                .expect("id comes from the store");
        }
    }

    fn sampled_order(&mut self, policy: &Policy) -> Vec<usize> {
        let mut live: Vec<usize> = (0..policy.scores.len())
            .filter(|&i| policy.scores[i].probability > 0.0)
            .collect();
        let mut order = Vec::with_capacity(policy.scores.len());
        while !live.is_empty() {
            let total: f64 = live.iter().map(|&i| policy.scores[i].probability).sum();
            let mut r = self.rng.random::<f64>() * total;
            let mut pick = live.len() - 1;
            for (k, &i) in live.iter().enumerate() {
                r -= policy.scores[i].probability;
                if r <= 0.0 {
                    pick = k;
                    break;
                }
            }
            order.push(live.remove(pick));
        }
        let rest: Vec<usize> = (0..policy.scores.len())
            .filter(|i| !order.contains(i))
            .collect();
        order.extend(rest);
        order
    }
}

/// Runs preference-guided search on `problem`. Elicited preferences are
/// appended to `store`; the run's usage log is moved into the returned
/// stats. Failures are reported in the outcome, never as panics.
pub fn pg_search(
    domain: &Domain,
    problem: &Problem,
    expert: &mut dyn ExpertChannel,
    store: &mut PreferenceStore,
    params: &SearchParams,
    strategy: Strategy,
    observer: Option<Observer<'_>>,
) -> SearchOutcome {
    let start = Instant::now();
    let mut s = Searcher {
        domain,
        problem,
        params,
        strategy,
        store,
        expert,
        observer,
        rng: ChaCha8Rng::seed_from_u64(params.rng_seed),
        start,
        expert_wait: Duration::ZERO,
        next_node: 0,
        next_net: 0,
        path: HashSet::new(),
        plan: Vec::new(),
        net_nodes: Vec::new(),
        net_edges: Vec::new(),
        depth_cap_hit: false,
        stats: RunStats {
            problem: problem.name.to_string(),
            strategy: strategy.to_string(),
            ..RunStats::default()
        },
    };
    let mut frontier = Frontier::default();
    let roots: Vec<(usize, Task)> = problem.initial_tasks.iter().cloned().enumerate().collect();
    for (id, t) in roots.iter().rev() {
        frontier = frontier.push(t.clone(), *id);
    }
    s.next_net = roots.len();
    s.net_nodes.extend(roots);

    let valid_params = params.temperature > 0.0 && params.temperature.is_finite();
    let found = if valid_params {
        s.recur(&problem.initial_state, &frontier, 0)
    } else {
        Ok(false)
    };
    let result = match found {
        Ok(true) => {
            let plan = Plan {
                steps: std::mem::take(&mut s.plan),
            };
            let network = TaskNetwork {
                nodes: s.net_nodes.drain(..).collect(),
                edges: s.net_edges.drain(..).collect(),
            };
            Ok(Solution { plan, network })
        }
        Ok(false) if s.depth_cap_hit => Err(UnsolvedReason::DepthCap),
        Ok(false) => Err(UnsolvedReason::Exhausted),
        Err(Stop::Timeout) => Err(UnsolvedReason::Timeout),
    };
    match &result {
        Ok(sol) => s.emit(SearchEvent::PlanFound { plan: &sol.plan }),
        Err(reason) => s.emit(SearchEvent::Failed { reason: *reason }),
    }
    let mut stats = s.stats;
    stats.solved = result.is_ok();
    stats.reason = result.as_ref().err().copied();
    stats.plan_len = result.as_ref().map_or(0, |sol| sol.plan.len());
    stats.wall_ms = start.elapsed().as_millis() as u64;
    stats.usage = store_usage(s.store, stats.max_depth, problem.name.as_str());
    SearchOutcome { result, stats }
}

fn store_usage(store: &mut PreferenceStore, max_depth: usize, problem: &str) -> Vec<UsageRecord> {
    store.take_usage(max_depth, problem)
}
