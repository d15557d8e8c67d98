//! Exhaustive decomposition search, used as ground truth on small problems.
//!
//! A configuration is a set of facts plus the ordered list of pending ground
//! tasks. Method bindings are found by trying every object for every free
//! variable, and the shortest plan is found by a 0-1 breadth-first search
//! (primitive steps cost 1, decompositions cost 0). Only the raw domain data
//! is used; none of the planner's matching or state code is involved.

use std::collections::{BTreeSet, HashMap, HashSet, VecDeque};

use pgplan_core::{Atom, Domain, Method, Problem, Task, Term};
use thiserror::Error;

pub const DEFAULT_CONFIG_LIMIT: usize = 10_000;

type Fact = (String, Vec<String>);
type GroundTask = (String, Vec<String>);

#[derive(Clone, Hash, PartialEq, Eq)]
struct Config {
    facts: BTreeSet<Fact>,
    tasks: Vec<GroundTask>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EnumerateError {
    #[error("decomposition space exceeds {limit} configurations")]
    SpaceTooLarge { limit: usize },
    #[error("task {0} is not ground")]
    NotGround(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Exploration {
    /// Length of the shortest plan, if any plan exists.
    pub shortest: Option<usize>,
    /// Distinct configurations visited.
    pub configs: usize,
}

fn fact_of(a: &Atom) -> Fact {
    (
        a.predicate.as_str().to_string(),
        a.args.iter().map(|t| t.to_string()).collect(),
    )
}

fn ground_task(t: &Task) -> Result<GroundTask, EnumerateError> {
    let mut args = Vec::new();
    for a in &t.args {
        match a {
            Term::Const(c) => args.push(c.as_str().to_string()),
            Term::Var(_) => return Err(EnumerateError::NotGround(t.to_string())),
        }
    }
    Ok((t.name.as_str().to_string(), args))
}

fn instantiate(
    pred: &str,
    args: &[Term],
    env: &HashMap<String, String>,
) -> Option<(String, Vec<String>)> {
    let mut out = Vec::with_capacity(args.len());
    for t in args {
        match t {
            Term::Const(c) => out.push(c.as_str().to_string()),
            Term::Var(v) => out.push(env.get(v.as_str())?.clone()),
        }
    }
    Some((pred.to_string(), out))
}

/// Every constant the problem or the domain mentions.
fn universe(domain: &Domain, problem: &Problem) -> Vec<String> {
    let mut objs: BTreeSet<String> = problem
        .objects
        .iter()
        .map(|o| o.as_str().to_string())
        .collect();
    let mut add_terms = |ts: &[Term]| {
        for t in ts {
            if let Term::Const(c) = t {
                objs.insert(c.as_str().to_string());
            }
        }
    };
    for m in &domain.methods {
        for a in &m.admissibility {
            add_terms(&a.args);
        }
        for s in &m.subtasks {
            add_terms(&s.args);
        }
    }
    for o in &domain.operators {
        for a in o
            .preconditions
            .iter()
            .chain(&o.delete_list)
            .chain(&o.add_list)
        {
            add_terms(&a.args);
        }
    }
    objs.into_iter().collect()
}

struct Explorer<'a> {
    domain: &'a Domain,
    objects: Vec<String>,
    goal: BTreeSet<Fact>,
}

impl Explorer<'_> {
    fn apply(&self, facts: &BTreeSet<Fact>, name: &str, args: &[String]) -> Option<BTreeSet<Fact>> {
        let op = self
            .domain
            .operators
            .iter()
            .find(|o| o.name.as_str() == name)?;
        if op.params.len() != args.len() {
            return None;
        }
        let mut env = HashMap::new();
        for (p, a) in op.params.iter().zip(args) {
            if let Some(prev) = env.insert(p.as_str().to_string(), a.clone()) {
                if &prev != a {
                    return None;
                }
            }
        }
        let inst = |atoms: &[Atom]| -> Option<Vec<Fact>> {
            atoms
                .iter()
                .map(|a| instantiate(a.predicate.as_str(), &a.args, &env))
                .collect()
        };
        let pre = inst(&op.preconditions)?;
        if !pre.iter().all(|f| facts.contains(f)) {
            return None;
        }
        let dels = inst(&op.delete_list)?;
        let adds = inst(&op.add_list)?;
        if adds.iter().any(|f| dels.contains(f)) {
            return None;
        }
        let mut next = facts.clone();
        for f in &dels {
            next.remove(f);
        }
        next.extend(adds);
        Some(next)
    }

    /// All environments extending `env` under which every atom in
    /// `conds[i..]` is a fact.
    fn bindings(
        &self,
        facts: &BTreeSet<Fact>,
        conds: &[Atom],
        env: HashMap<String, String>,
        out: &mut Vec<HashMap<String, String>>,
    ) {
        let Some((first, rest)) = conds.split_first() else {
            out.push(env);
            return;
        };
        let free: Vec<String> = first
            .args
            .iter()
            .filter_map(|t| match t {
                Term::Var(v) if !env.contains_key(v.as_str()) => Some(v.as_str().to_string()),
                _ => None,
            })
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect();
        let n = self.objects.len();
        let total = n.checked_pow(free.len() as u32).unwrap_or(usize::MAX);
        for mut k in 0..total {
            let mut e = env.clone();
            for v in &free {
                e.insert(v.clone(), self.objects[k % n].clone());
                k /= n;
            }
            let fact = instantiate(first.predicate.as_str(), &first.args, &e)
                .expect("all variables bound");
            if facts.contains(&fact) {
                self.bindings(facts, rest, e, out);
            }
        }
    }

    fn decompositions(
        &self,
        facts: &BTreeSet<Fact>,
        name: &str,
        args: &[String],
    ) -> Vec<Vec<GroundTask>> {
        let mut out = Vec::new();
        for m in self
            .domain
            .methods
            .iter()
            .filter(|m| m.task.as_str() == name)
        {
            out.extend(self.method_instances(facts, m, args));
        }
        out
    }

    fn method_instances(
        &self,
        facts: &BTreeSet<Fact>,
        m: &Method,
        args: &[String],
    ) -> Vec<Vec<GroundTask>> {
        if m.params.len() != args.len() {
            return Vec::new();
        }
        let mut env = HashMap::new();
        for (p, a) in m.params.iter().zip(args) {
            if let Some(prev) = env.insert(p.as_str().to_string(), a.clone()) {
                if &prev != a {
                    return Vec::new();
                }
            }
        }
        let mut envs = Vec::new();
        self.bindings(facts, &m.admissibility, env, &mut envs);
        envs.iter()
            .filter_map(|e| {
                m.subtasks
                    .iter()
                    .map(|t| instantiate(t.name.as_str(), &t.args, e))
                    .collect()
            })
            .collect()
    }

    fn successors(&self, c: &Config) -> Vec<(Config, usize)> {
        let Some(((name, args), rest)) = c.tasks.split_first() else {
            return Vec::new();
        };
        if self
            .domain
            .operators
            .iter()
            .any(|o| o.name.as_str() == name)
        {
            return match self.apply(&c.facts, name, args) {
                Some(facts) => vec![(
                    Config {
                        facts,
                        tasks: rest.to_vec(),
                    },
                    1,
                )],
                None => Vec::new(),
            };
        }
        self.decompositions(&c.facts, name, args)
            .into_iter()
            .map(|subs| {
                let mut tasks = subs;
                tasks.extend_from_slice(rest);
                (
                    Config {
                        facts: c.facts.clone(),
                        tasks,
                    },
                    0,
                )
            })
            .collect()
    }
}

/// Shortest plan from an arbitrary configuration of `problem`'s domain.
pub fn explore_from(
    domain: &Domain,
    problem: &Problem,
    facts: impl IntoIterator<Item = Atom>,
    tasks: &[Task],
    limit: usize,
) -> Result<Exploration, EnumerateError> {
    let ex = Explorer {
        domain,
        objects: universe(domain, problem),
        goal: problem.goal.iter().map(fact_of).collect(),
    };
    let start = Config {
        facts: facts.into_iter().map(|a| fact_of(&a)).collect(),
        tasks: tasks.iter().map(ground_task).collect::<Result<_, _>>()?,
    };
    let mut seen: HashSet<Config> = HashSet::new();
    let mut dist: HashMap<Config, usize> = HashMap::new();
    let mut queue = VecDeque::new();
    dist.insert(start.clone(), 0);
    queue.push_back(start);
    while let Some(c) = queue.pop_front() {
        if !seen.insert(c.clone()) {
            continue;
        }
        if seen.len() > limit {
            return Err(EnumerateError::SpaceTooLarge { limit });
        }
        let d = dist[&c];
        if c.tasks.is_empty() && ex.goal.is_subset(&c.facts) {
            return Ok(Exploration {
                shortest: Some(d),
                configs: seen.len(),
            });
        }
        for (next, cost) in ex.successors(&c) {
            let nd = d + cost;
            if seen.contains(&next) || dist.get(&next).is_some_and(|&old| old <= nd) {
                continue;
            }
            dist.insert(next.clone(), nd);
            if cost == 0 {
                queue.push_front(next);
            } else {
                queue.push_back(next);
            }
        }
    }
    Ok(Exploration {
        shortest: None,
        configs: seen.len(),
    })
}

/// Shortest plan for `problem` from its initial configuration.
pub fn explore(
    domain: &Domain,
    problem: &Problem,
    limit: usize,
) -> Result<Exploration, EnumerateError> {
    explore_from(
        domain,
        problem,
        problem.initial_state.iter().cloned(),
        &problem.initial_tasks,
        limit,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use pgplan_core::{parse_domain, parse_problem};

    const DOM: &str = "(defdomain r ((:predicate At 1) (:predicate Edge 2)
        (:operator (move ?a ?b) ((At ?a) (Edge ?a ?b)) ((At ?a)) ((At ?b)))
        (:method arrived (Reach ?g) ((At ?g)) ())
        (:method step (Reach ?g) ((At ?a) (Edge ?a ?b)) ((move ?a ?b) (Reach ?g)))))";

    #[test]
    fn shortest_path_through_a_cycle() {
        let d = parse_domain(DOM).unwrap();
        let p = parse_problem(
            "(defproblem p r ((At A) (Edge A B) (Edge B A) (Edge B C) (Edge A D) (Edge D E) (Edge E C)) ((Reach C)) ((At C)))",
            &d,
        )
        .unwrap();
        assert_eq!(explore(&d, &p, 1000).unwrap().shortest, Some(2));
    }

    #[test]
    fn unreachable_and_limits() {
        let d = parse_domain(DOM).unwrap();
        let p = parse_problem(
            "(defproblem p r ((At A) (Edge A B) (Edge B A)) ((Reach C)) ((At C)))",
            &d,
        )
        .unwrap();
        assert_eq!(explore(&d, &p, 1000).unwrap().shortest, None);
        assert_eq!(
            explore(&d, &p, 1),
            Err(EnumerateError::SpaceTooLarge { limit: 1 })
        );
    }
}
