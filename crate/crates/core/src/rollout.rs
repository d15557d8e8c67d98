//! Depth-bounded simulation of a method, used to estimate its cost.

use std::collections::BTreeSet;

use crate::domain::{admissible_methods, apply_task, Candidate, Domain, Task};
use crate::state::{goal_distance, State};
use crate::term::Atom;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct RolloutResult {
    /// Primitive actions appended during the simulation.
    pub plan_len: usize,
    /// Goal distance at the state reached.
    pub distance: usize,
    /// The simulation hit a task with no admissible method or an
    /// inapplicable primitive.
    pub dead_end: bool,
}

/// Simulates `candidate` from `state`: its subtasks are executed, primitives
/// applied as they come, and up to `depth` further compound tasks decomposed
/// with a greedy, preference-free policy. Simulation stops when the subtasks
/// are exhausted, the decomposition budget runs out at a compound task, or a
/// dead end is reached.
pub fn rollout(
    state: &State,
    candidate: &Candidate<'_>,
    depth: usize,
    domain: &Domain,
    goal: &BTreeSet<Atom>,
) -> RolloutResult {
    let mut state = state.clone();
    let mut agenda: Vec<Task> = candidate.subtasks();
    agenda.reverse();
    let mut budget = depth;
    let mut plan_len = 0;
    while let Some(task) = agenda.pop() {
        if task.is_primitive() {
            match apply_task(&state, domain, &task) {
                Ok(next) => {
                    state = next;
                    plan_len += 1;
                }
                Err(_) => {
                    return RolloutResult {
                        plan_len,
                        distance: goal_distance(&state, goal),
                        dead_end: true,
                    }
                }
            }
            continue;
        }
        if budget == 0 {
            break;
        }
        let cands = admissible_methods(&state, &task, domain);
        match greedy_choice(&state, &cands, domain, goal) {
            Some(i) => {
                budget -= 1;
                let mut subs = cands[i].subtasks();
                subs.reverse();
                agenda.extend(subs);
            }
            None => {
                return RolloutResult {
                    plan_len,
                    distance: goal_distance(&state, goal),
                    dead_end: true,
                }
            }
        }
    }
    RolloutResult {
        plan_len,
        distance: goal_distance(&state, goal),
        dead_end: false,
    }
}

/// The candidate whose leading run of primitive subtasks leaves the smallest
/// goal distance; the first such candidate on ties. Candidates whose leading
/// primitives fail are skipped.
fn greedy_choice(
    state: &State,
    cands: &[Candidate<'_>],
    domain: &Domain,
    goal: &BTreeSet<Atom>,
) -> Option<usize> {
    let mut best: Option<(usize, usize)> = None;
    for (i, c) in cands.iter().enumerate() {
        let mut s = state.clone();
        let mut ok = true;
        for t in c.subtasks().iter().take_while(|t| t.is_primitive()) {
            match apply_task(&s, domain, t) {
                Ok(next) => s = next,
                Err(_) => {
                    ok = false;
                    break;
                }
            }
        }
        if !ok {
            continue;
        }
        let d = goal_distance(&s, goal);
        if best.is_none_or(|(_, bd)| d < bd) {
            best = Some((i, d));
        }
    }
    best.map(|(i, _)| i)
}
