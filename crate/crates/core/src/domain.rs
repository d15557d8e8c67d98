//! HTN domain model: operators, methods, tasks, problems and plans.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::ApplyError;
use crate::state::State;
use crate::term::{ordered_variables, Atom, Ident, Substitution, Term};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum TaskKind {
    Primitive,
    NonPrimitive,
}

/// A task instance or template, e.g. `(Clear ?b)`.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Task {
    pub name: Ident,
    pub args: Vec<Term>,
    pub kind: TaskKind,
}

impl Task {
    pub fn is_primitive(&self) -> bool {
        self.kind == TaskKind::Primitive
    }

    pub fn is_ground(&self) -> bool {
        self.args.iter().all(Term::is_ground)
    }

    pub fn apply(&self, subst: &Substitution) -> Task {
        Task {
            name: self.name.clone(),
            args: self.args.iter().map(|t| t.apply(subst)).collect(),
            kind: self.kind,
        }
    }

    /// Task viewed as an atom, for unification with task patterns.
    pub fn as_atom(&self) -> Atom {
        Atom {
            predicate: self.name.clone(),
            args: self.args.clone(),
        }
    }
}

impl fmt::Display for Task {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}", self.name)?;
        for a in &self.args {
            write!(f, " {a}")?;
        }
        f.write_str(")")
    }
}

impl fmt::Debug for Task {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

/// A primitive action with STRIPS effects.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Operator {
    pub name: Ident,
    pub params: Vec<Ident>,
    pub preconditions: Vec<Atom>,
    pub delete_list: Vec<Atom>,
    pub add_list: Vec<Atom>,
}

impl Operator {
    /// Binds parameters positionally to ground arguments.
    pub fn bind(&self, args: &[Term]) -> Option<Substitution> {
        if args.len() != self.params.len() {
            return None;
        }
        let mut subst = Substitution::new();
        for (p, a) in self.params.iter().zip(args) {
            let Term::Const(c) = a else { return None };
            if let Some(prev) = subst.insert(p.clone(), c.clone()) {
                if &prev != c {
                    return None;
                }
            }
        }
        Some(subst)
    }
}

/// A decomposition rule for a non-primitive task.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Method {
    pub id: Ident,
    pub task: Ident,
    pub params: Vec<Ident>,
    pub admissibility: Vec<Atom>,
    pub subtasks: Vec<Task>,
}

impl Method {
    /// Head variables followed by admissibility-only variables, in order of
    /// first appearance.
    pub fn variables(&self) -> Vec<Ident> {
        let mut seed = Vec::new();
        for p in &self.params {
            if !seed.contains(p) {
                seed.push(p.clone());
            }
        }
        ordered_variables(&self.admissibility, &seed)
    }

    pub fn head(&self) -> Task {
        Task {
            name: self.task.clone(),
            args: self.params.iter().map(|p| Term::Var(p.clone())).collect(),
            kind: TaskKind::NonPrimitive,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Domain {
    pub name: Ident,
    /// predicate → arity, in declaration order
    pub predicates: Vec<(Ident, usize)>,
    pub operators: Vec<Operator>,
    pub methods: Vec<Method>,
}

impl Domain {
    pub fn predicate_arity(&self, name: &str) -> Option<usize> {
        self.predicates
            .iter()
            .find(|(p, _)| p.as_str() == name)
            .map(|(_, a)| *a)
    }

    pub fn operator(&self, name: &str) -> Option<&Operator> {
        self.operators.iter().find(|o| o.name.as_str() == name)
    }

    pub fn method(&self, id: &str) -> Option<&Method> {
        self.methods.iter().find(|m| m.id.as_str() == id)
    }

    pub fn methods_for<'a>(&'a self, task: &'a str) -> impl Iterator<Item = &'a Method> + 'a {
        self.methods.iter().filter(move |m| m.task.as_str() == task)
    }

    pub fn is_compound_task(&self, name: &str) -> bool {
        self.methods.iter().any(|m| m.task.as_str() == name)
    }

    /// Arity of a task name, primitive or compound.
    pub fn task_arity(&self, name: &str) -> Option<usize> {
        if let Some(op) = self.operator(name) {
            return Some(op.params.len());
        }
        self.methods_for(name).next().map(|m| m.params.len())
    }

    pub fn task_kind(&self, name: &str) -> Option<TaskKind> {
        if self.operator(name).is_some() {
            Some(TaskKind::Primitive)
        } else if self.is_compound_task(name) {
            Some(TaskKind::NonPrimitive)
        } else {
            None
        }
    }

    /// Method ids in declaration order.
    pub fn method_ids(&self) -> impl Iterator<Item = &Ident> {
        self.methods.iter().map(|m| &m.id)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Problem {
    pub name: Ident,
    pub domain_ref: Ident,
    pub initial_state: State,
    pub initial_tasks: Vec<Task>,
    pub goal: BTreeSet<Atom>,
    /// Every constant mentioned by the problem.
    pub objects: BTreeSet<Ident>,
}

/// One ground operator application.
#[derive(Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PlanStep {
    pub operator: Ident,
    pub args: Vec<Ident>,
}

impl PlanStep {
    pub fn from_task(task: &Task) -> Option<PlanStep> {
        let args = task
            .args
            .iter()
            .map(|t| match t {
                Term::Const(c) => Some(c.clone()),
                Term::Var(_) => None,
            })
            .collect::<Option<Vec<_>>>()?;
        Some(PlanStep {
            operator: task.name.clone(),
            args,
        })
    }
}

impl fmt::Display for PlanStep {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}", self.operator)?;
        for a in &self.args {
            write!(f, " {a}")?;
        }
        f.write_str(")")
    }
}

impl fmt::Debug for PlanStep {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Plan {
    pub steps: Vec<PlanStep>,
}

impl Plan {
    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }
}

impl fmt::Display for Plan {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for s in &self.steps {
            writeln!(f, "{s}")?;
        }
        Ok(())
    }
}

/// The decomposition DAG of a solved problem: nodes are task instances,
/// edges run from a task to each of its subtasks.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct TaskNetwork {
    pub nodes: BTreeMap<usize, Task>,
    pub edges: BTreeSet<(usize, usize)>,
}

impl TaskNetwork {
    pub fn children(&self, node: usize) -> impl Iterator<Item = usize> + '_ {
        self.edges.range((node, 0)..(node + 1, 0)).map(|&(_, c)| c)
    }

    pub fn roots(&self) -> Vec<usize> {
        let targets: HashSet<usize> = self.edges.iter().map(|&(_, c)| c).collect();
        self.nodes
            .keys()
            .copied()
            .filter(|n| !targets.contains(n))
            .collect()
    }

    /// Kahn's algorithm; true when the edge set has no cycle.
    pub fn is_acyclic(&self) -> bool {
        let mut indeg: BTreeMap<usize, usize> = self.nodes.keys().map(|&n| (n, 0)).collect();
        for &(_, c) in &self.edges {
            *indeg.entry(c).or_default() += 1;
        }
        let mut ready: Vec<usize> = indeg
            .iter()
            .filter(|(_, &d)| d == 0)
            .map(|(&n, _)| n)
            .collect();
        let mut seen = 0;
        while let Some(n) = ready.pop() {
            seen += 1;
            for c in self.children(n).collect::<Vec<_>>() {
                let d = indeg.get_mut(&c).expect("edge target is a node");
                *d -= 1;
                if *d == 0 {
                    ready.push(c);
                }
            }
        }
        seen == indeg.len()
    }
}

/// `(state ∖ del·θ) ∪ add·θ`, after checking `pre·θ ⊆ state`.
pub fn apply_operator(
    state: &State,
    op: &Operator,
    binding: &Substitution,
) -> Result<State, ApplyError> {
    for p in &op.params {
        if !binding.contains_key(p) {
            return Err(ApplyError::UnboundVariable {
                operator: op.name.to_string(),
                var: p.to_string(),
            });
        }
    }
    let missing: Vec<Atom> = op
        .preconditions
        .iter()
        .map(|a| a.apply(binding))
        .filter(|a| !state.contains(a))
        .collect();
    if !missing.is_empty() {
        return Err(ApplyError::PreconditionFailure {
            operator: op.name.to_string(),
            missing,
        });
    }
    let deletes: Vec<Atom> = op.delete_list.iter().map(|d| d.apply(binding)).collect();
    let adds: Vec<Atom> = op.add_list.iter().map(|a| a.apply(binding)).collect();
    let clash: Vec<Atom> = adds
        .iter()
        .filter(|a| deletes.contains(a))
        .cloned()
        .collect();
    if !clash.is_empty() {
        return Err(ApplyError::ConflictingEffects {
            operator: op.name.to_string(),
            atoms: clash,
        });
    }
    let mut next = state.clone();
    for d in &deletes {
        next.remove(d);
    }
    for a in adds {
        next.insert(a);
    }
    Ok(next)
}

/// Applies a ground primitive task.
pub fn apply_task(state: &State, domain: &Domain, task: &Task) -> Result<State, ApplyError> {
    let op = domain
        .operator(task.name.as_str())
        .ok_or_else(|| ApplyError::UnknownOperator(task.name.to_string()))?;
    let binding = op
        .bind(&task.args)
        .ok_or_else(|| ApplyError::UnboundVariable {
            operator: op.name.to_string(),
            var: op.params.first().map(|p| p.to_string()).unwrap_or_default(),
        })?;
    apply_operator(state, op, &binding)
}

/// An admissible way to decompose a task: a method plus the binding that
/// satisfies its head and admissibility.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Candidate<'d> {
    pub method: &'d Method,
    pub binding: Substitution,
    /// Declaration index of the method within the domain.
    pub order: usize,
}

impl Candidate<'_> {
    pub fn subtasks(&self) -> Vec<Task> {
        self.method
            .subtasks
            .iter()
            .map(|t| t.apply(&self.binding))
            .collect()
    }

    /// `id` or `id[?v=C ...]` listing admissibility-only variables.
    pub fn label(&self) -> String {
        let extra: Vec<String> = self
            .method
            .variables()
            .into_iter()
            .filter(|v| !self.method.params.contains(v))
            .filter_map(|v| self.binding.get(&v).map(|c| format!("?{v}={c}")))
            .collect();
        if extra.is_empty() {
            self.method.id.to_string()
        } else {
            format!("{}[{}]", self.method.id, extra.join(","))
        }
    }
}

/// Methods whose head unifies with `task` and whose admissibility holds in
/// `state`. Ordered by declaration order, then lexicographically by the
/// binding values (variables taken in first-appearance order). Candidates
/// with the same method and the same ground subtasks are reported once.
pub fn admissible_methods<'d>(
    state: &State,
    task: &Task,
    domain: &'d Domain,
) -> Vec<Candidate<'d>> {
    let mut out = Vec::new();
    for (order, method) in domain.methods.iter().enumerate() {
        if method.task != task.name || method.params.len() != task.args.len() {
            continue;
        }
        let mut head = Substitution::new();
        let mut ok = true;
        for (p, a) in method.params.iter().zip(&task.args) {
            let Term::Const(c) = a else {
                ok = false;
                break;
            };
            match head.get(p) {
                Some(prev) if prev != c => {
                    ok = false;
                    break;
                }
                _ => {
                    head.insert(p.clone(), c.clone());
                }
            }
        }
        if !ok {
            continue;
        }
        let vars = method.variables();
        let mut bindings = state.satisfy(&method.admissibility, &head);
        bindings.sort_by(|a, b| {
            let ka = vars.iter().map(|v| a.get(v));
            let kb = vars.iter().map(|v| b.get(v));
            ka.cmp(kb)
        });
        let mut seen: HashSet<Vec<Task>> = HashSet::new();
        for binding in bindings {
            let cand = Candidate {
                method,
                binding,
                order,
            };
            if seen.insert(cand.subtasks()) {
                out.push(cand);
            }
        }
    }
    out
}
