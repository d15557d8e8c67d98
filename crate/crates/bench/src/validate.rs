//! Plan validation written against the raw domain data only.
//!
//! Nothing here goes through the planner's state or matching code, so a
//! bug there cannot hide a bad plan.

use std::collections::{BTreeSet, HashMap};

use pgplan_core::{Domain, Plan, Problem, Term};
use thiserror::Error;

type Fact = (String, Vec<String>);

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ValidationError {
    #[error("step {step}: no operator named {name}")]
    UnknownOperator { step: usize, name: String },
    #[error("step {step}: {name} takes {expected} argument(s), got {found}")]
    Arity {
        step: usize,
        name: String,
        expected: usize,
        found: usize,
    },
    #[error("step {step}: precondition {fact} does not hold")]
    Precondition { step: usize, fact: String },
    #[error("step {step}: effect {fact} is both added and deleted")]
    Conflict { step: usize, fact: String },
    #[error("goal atoms unmet after the plan: {0:?}")]
    GoalUnmet(Vec<String>),
}

fn render((p, args): &Fact) -> String {
    let mut s = format!("({p}");
    for a in args {
        s.push(' ');
        s.push_str(a);
    }
    s.push(')');
    s
}

fn ground(pred: &str, args: &[Term], env: &HashMap<&str, &str>) -> Option<Fact> {
    let mut out = Vec::with_capacity(args.len());
    for t in args {
        match t {
            Term::Const(c) => out.push(c.as_str().to_string()),
            Term::Var(v) => out.push(env.get(v.as_str())?.to_string()),
        }
    }
    Some((pred.to_string(), out))
}

/// Checks every step's preconditions in sequence from the initial state,
/// then the goal.
pub fn validate_plan(
    domain: &Domain,
    problem: &Problem,
    plan: &Plan,
) -> Result<(), ValidationError> {
    let mut facts: BTreeSet<Fact> = problem
        .initial_state
        .iter()
        .map(|a| {
            (
                a.predicate.as_str().to_string(),
                a.args.iter().map(|t| t.to_string()).collect(),
            )
        })
        .collect();
    for (i, step) in plan.steps.iter().enumerate() {
        let name = step.operator.as_str();
        let op = domain
            .operators
            .iter()
            .find(|o| o.name.as_str() == name)
            .ok_or_else(|| ValidationError::UnknownOperator {
                step: i,
                name: name.to_string(),
            })?;
        if op.params.len() != step.args.len() {
            return Err(ValidationError::Arity {
                step: i,
                name: name.to_string(),
                expected: op.params.len(),
                found: step.args.len(),
            });
        }
        let mut env: HashMap<&str, &str> = HashMap::new();
        for (p, a) in op.params.iter().zip(&step.args) {
            if let Some(prev) = env.insert(p.as_str(), a.as_str()) {
                if prev != a.as_str() {
                    return Err(ValidationError::Arity {
                        step: i,
                        name: name.to_string(),
                        expected: op.params.len(),
                        found: step.args.len(),
                    });
                }
            }
        }
        let instantiate = |atoms: &[pgplan_core::Atom]| -> Vec<Fact> {
            atoms
                .iter()
                .map(|a| {
                    ground(a.predicate.as_str(), &a.args, &env)
                        .expect("operator variables are parameters")
                })
                .collect()
        };
        for f in instantiate(&op.preconditions) {
            if !facts.contains(&f) {
                return Err(ValidationError::Precondition {
                    step: i,
                    fact: render(&f),
                });
            }
        }
        let dels = instantiate(&op.delete_list);
        let adds = instantiate(&op.add_list);
        if let Some(f) = adds.iter().find(|f| dels.contains(f)) {
            return Err(ValidationError::Conflict {
                step: i,
                fact: render(f),
            });
        }
        for f in &dels {
            facts.remove(f);
        }
        facts.extend(adds);
    }
    let unmet: Vec<String> = problem
        .goal
        .iter()
        .map(|a| {
            (
                a.predicate.as_str().to_string(),
                a.args.iter().map(|t| t.to_string()).collect::<Vec<_>>(),
            )
        })
        .filter(|f| !facts.contains(f))
        .map(|f| render(&f))
        .collect();
    if unmet.is_empty() {
        Ok(())
    } else {
        Err(ValidationError::GoalUnmet(unmet))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use pgplan_core::{parse_domain, parse_problem, PlanStep};

    const DOM: &str = "(defdomain d ((:predicate At 1) (:predicate Edge 2)
        (:operator (move ?a ?b) ((At ?a) (Edge ?a ?b)) ((At ?a)) ((At ?b)))
        (:method go (Go ?a ?b) () ((move ?a ?b)))))";

    fn step(op: &str, args: &[&str]) -> PlanStep {
        PlanStep {
            operator: op.into(),
            args: args.iter().map(|a| (*a).into()).collect(),
        }
    }

    #[test]
    fn accepts_and_rejects() {
        let d = parse_domain(DOM).unwrap();
        let p = parse_problem(
            "(defproblem p d ((At X) (Edge X Y) (Edge Y Z)) ((Go X Y)) ((At Z)))",
            &d,
        )
        .unwrap();
        let good = Plan {
            steps: vec![step("move", &["X", "Y"]), step("move", &["Y", "Z"])],
        };
        assert_eq!(validate_plan(&d, &p, &good), Ok(()));

        let short = Plan {
            steps: vec![step("move", &["X", "Y"])],
        };
        assert_eq!(
            validate_plan(&d, &p, &short),
            Err(ValidationError::GoalUnmet(vec!["(At Z)".into()]))
        );

        let bad = Plan {
            steps: vec![step("move", &["Y", "Z"])],
        };
        assert!(matches!(
            validate_plan(&d, &p, &bad),
            Err(ValidationError::Precondition { step: 0, .. })
        ));

        let unknown = Plan {
            steps: vec![step("fly", &["X"])],
        };
        assert!(matches!(
            validate_plan(&d, &p, &unknown),
            Err(ValidationError::UnknownOperator { .. })
        ));
    }
}
