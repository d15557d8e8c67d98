//! How far the planner's root distribution sits from the best achievable
//! one, with and without preferences.

use pgplan_core::policy::DEAD_END;
use pgplan_core::{
    admissible_methods, boltzmann, eval_node, Domain, PolicyError, PreferenceStore, Problem,
    SearchNode, SearchParams,
};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::enumerate::{explore, explore_from, EnumerateError, DEFAULT_CONFIG_LIMIT};

/// Added to every planner probability before taking logarithms.
pub const SMOOTHING: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum KlError {
    #[error(transparent)]
    Enumerate(#[from] EnumerateError),
    #[error(transparent)]
    Policy(#[from] PolicyError),
    #[error("the first initial task is primitive")]
    PrimitiveRoot,
    #[error("no root method leads to a plan")]
    Unsolvable,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KlReport {
    pub methods: Vec<String>,
    /// Shortest plan length under each root method, if any plan exists.
    pub optimal_len: Vec<Option<usize>>,
    pub optimal: Vec<f64>,
    pub rollout: Vec<f64>,
    pub guided: Vec<f64>,
    pub d_rollout: f64,
    pub d_guided: f64,
    pub difference: f64,
}

/// `KL(p ‖ q)` with `q` smoothed by [`SMOOTHING`]; terms with `p = 0`
/// contribute nothing.
pub fn kl_divergence(p: &[f64], q: &[f64]) -> f64 {
    let k = q.len() as f64;
    p.iter()
        .zip(q)
        .filter(|(pi, _)| **pi > 0.0)
        .map(|(pi, qi)| pi * (pi / ((qi + SMOOTHING) / (1.0 + k * SMOOTHING))).ln())
        .sum::<f64>()
        .max(0.0)
}

/// Compares the distributions over the root task's methods: the best
/// achievable one (Boltzmann over negated shortest plan length per method,
/// found exhaustively), the rollout-only policy, and the policy with
/// `store`'s preferences.
pub fn kl_diagnostic(
    domain: &Domain,
    problem: &Problem,
    store: &PreferenceStore,
    params: &SearchParams,
) -> Result<KlReport, KlError> {
    explore(domain, problem, DEFAULT_CONFIG_LIMIT)?;
    let root = &problem.initial_tasks[0];
    if root.is_primitive() {
        return Err(KlError::PrimitiveRoot);
    }
    let state = &problem.initial_state;
    let cands = admissible_methods(state, root, domain);
    if cands.is_empty() {
        return Err(PolicyError::NoAdmissibleMethods.into());
    }
    let rest = &problem.initial_tasks[1..];
    let mut optimal_len = Vec::with_capacity(cands.len());
    for c in &cands {
        let mut tasks = c.subtasks();
        tasks.extend_from_slice(rest);
        optimal_len.push(
            explore_from(
                domain,
                problem,
                state.iter().cloned(),
                &tasks,
                DEFAULT_CONFIG_LIMIT,
            )?
            .shortest,
        );
    }
    if optimal_len.iter().all(Option::is_none) {
        return Err(KlError::Unsolvable);
    }
    let neg_len: Vec<f64> = optimal_len
        .iter()
        .map(|l| l.map_or(DEAD_END, |l| -(l as f64)))
        .collect();
    let optimal = boltzmann(&neg_len, params.temperature)?;

    let node = SearchNode {
        state: state.clone(),
        task: root.clone(),
        depth: 0,
        partial_plan: Vec::new(),
    };
    let rollout_policy = eval_node(
        &node,
        domain,
        &problem.goal,
        &PreferenceStore::new(),
        params,
    )?;
    let guided_policy = eval_node(&node, domain, &problem.goal, store, params)?;
    let rollout = rollout_policy.probabilities();
    let guided = guided_policy.probabilities();
    let d_rollout = kl_divergence(&optimal, &rollout);
    let d_guided = kl_divergence(&optimal, &guided);
    Ok(KlReport {
        methods: rollout_policy
            .scores
            .iter()
            .map(|s| s.label.clone())
            .collect(),
        optimal_len,
        optimal,
        rollout,
        guided,
        d_rollout,
        d_guided,
        difference: d_rollout - d_guided,
    })
}
