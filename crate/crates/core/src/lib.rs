//! Interactive HTN planning guided by expert preferences.
//!
//! The crate covers the planning model (domains, problems, states, task
//! networks), the text formats for domains, problems, preferences and
//! scripted oracles, the method-scoring policy, and the search itself.

pub mod domain;
pub mod error;
pub mod expert;
pub mod parse;
pub mod policy;
pub mod preference;
mod print;
pub mod rollout;
pub mod search;
pub mod sexpr;
pub mod state;
pub mod term;

pub use domain::{
    admissible_methods, apply_operator, apply_task, Candidate, Domain, Method, Operator, Plan,
    PlanStep, Problem, Task, TaskKind, TaskNetwork,
};
pub use error::{ApplyError, FileError, ParseError, PolicyError, StoreError};
pub use expert::{
    load_upfront, log_elicited, ChannelKind, ExpertChannel, ExpertResponse, Query, ScriptedOracle,
    SilentExpert, UpfrontExpert,
};
pub use parse::{parse_atom, parse_domain, parse_problem, parse_task};
pub use policy::{boltzmann, entropy, score_method, MethodScore, Policy};
pub use preference::{Origin, Preference, PreferenceStore, UsageRecord};
pub use search::{
    eval_node, pg_search, should_query, NodeTrace, RunStats, SearchEvent, SearchNode,
    SearchOutcome, SearchParams, Solution, Strategy, UnsolvedReason,
};
pub use state::{goal_distance, State};
pub use term::{Atom, Ident, Term};
