//! Readers for the domain and problem text formats.
//!
//! ```text
//! domain   := "(defdomain" NAME "(" decl* ")" ")"
//! decl     := "(:predicate" NAME ARITY ")"
//!           | "(:operator" "(" NAME var* ")" conj conj conj ")"   ; pre, delete, add
//!           | "(:method" ID "(" NAME var* ")" conj "(" taskexpr* ")" ")"
//! problem  := "(defproblem" NAME DOMAINNAME "(" atom* ")" "(" taskexpr* ")" "(" atom* ")" ")"
//! ```

use std::collections::{BTreeSet, HashSet};

use crate::domain::{Domain, Method, Operator, Problem, Task, TaskKind};
use crate::error::ParseError;
use crate::sexpr::{read_one, Pos, Sexpr};
use crate::state::State;
use crate::term::{Atom, Ident, Term};

pub(crate) fn ident(sx: &Sexpr, what: &str) -> Result<Ident, ParseError> {
    let s = sx.expect_symbol(what)?;
    if !Ident::is_valid(s) {
        return Err(ParseError::InvalidIdentifier {
            name: s.to_string(),
            pos: sx.pos(),
        });
    }
    Ok(Ident::new(s))
}

pub(crate) fn term(sx: &Sexpr) -> Result<Term, ParseError> {
    let s = sx.expect_symbol("term")?;
    if let Some(v) = s.strip_prefix('?') {
        if !Ident::is_valid(v) {
            return Err(ParseError::InvalidIdentifier {
                name: s.to_string(),
                pos: sx.pos(),
            });
        }
        Ok(Term::Var(Ident::new(v)))
    } else {
        ident(sx, "term").map(Term::Const)
    }
}

fn variable(sx: &Sexpr) -> Result<Ident, ParseError> {
    match term(sx)? {
        Term::Var(v) => Ok(v),
        Term::Const(_) => Err(ParseError::syntax(sx.pos(), "variable (?name)")),
    }
}

fn keyword<'a>(items: &'a [Sexpr], kw: &str, pos: Pos) -> Result<&'a [Sexpr], ParseError> {
    match items.first().and_then(Sexpr::as_symbol) {
        Some(s) if s == kw => Ok(&items[1..]),
        _ => Err(ParseError::syntax(
            items.first().map(Sexpr::pos).unwrap_or(pos),
            &format!("'{kw}'"),
        )),
    }
}

fn exact<'a>(
    items: &'a [Sexpr],
    n: usize,
    pos: Pos,
    what: &str,
) -> Result<&'a [Sexpr], ParseError> {
    if items.len() == n {
        Ok(items)
    } else if items.len() > n {
        Err(ParseError::syntax(
            items[n].pos(),
            &format!("')' closing {what}"),
        ))
    } else {
        Err(ParseError::syntax(
            pos,
            &format!("{} more element(s) in {what}", n - items.len()),
        ))
    }
}

/// Parses `(PRED term*)` checking the predicate is declared with that arity.
pub(crate) fn atom(sx: &Sexpr, domain: &Domain) -> Result<Atom, ParseError> {
    let items = sx.expect_list("atom '(' PRED term* ')'")?;
    let Some(head) = items.first() else {
        return Err(ParseError::syntax(sx.pos(), "predicate name"));
    };
    let name = ident(head, "predicate name")?;
    let arity =
        domain
            .predicate_arity(name.as_str())
            .ok_or_else(|| ParseError::UndeclaredPredicate {
                name: name.to_string(),
                pos: head.pos(),
            })?;
    let args = items[1..].iter().map(term).collect::<Result<Vec<_>, _>>()?;
    if args.len() != arity {
        return Err(ParseError::Arity {
            name: name.to_string(),
            expected: arity,
            found: args.len(),
            pos: sx.pos(),
        });
    }
    Ok(Atom {
        predicate: name,
        args,
    })
}

pub(crate) fn conj(sx: &Sexpr, domain: &Domain) -> Result<Vec<Atom>, ParseError> {
    let items = sx.expect_list("conjunction '(' atom* ')'")?;
    items.iter().map(|a| atom(a, domain)).collect()
}

/// Parses `(NAME term*)` against the task names the domain defines.
pub(crate) fn task_expr(sx: &Sexpr, domain: &Domain) -> Result<Task, ParseError> {
    let items = sx.expect_list("task '(' NAME term* ')'")?;
    let Some(head) = items.first() else {
        return Err(ParseError::syntax(sx.pos(), "task name"));
    };
    let name = ident(head, "task name")?;
    let kind = domain
        .task_kind(name.as_str())
        .ok_or_else(|| ParseError::UnknownTask {
            name: name.to_string(),
            pos: head.pos(),
        })?;
    let args = items[1..].iter().map(term).collect::<Result<Vec<_>, _>>()?;
    let arity = domain.task_arity(name.as_str()).unwrap_or(0);
    if args.len() != arity {
        return Err(ParseError::Arity {
            name: name.to_string(),
            expected: arity,
            found: args.len(),
            pos: sx.pos(),
        });
    }
    Ok(Task { name, args, kind })
}

fn check_vars<'a>(
    atoms: impl IntoIterator<Item = &'a Atom>,
    bound: &HashSet<Ident>,
    context: &str,
    pos: Pos,
) -> Result<(), ParseError> {
    for a in atoms {
        for v in a.variables() {
            if !bound.contains(v) {
                return Err(ParseError::UnboundVariable {
                    var: v.to_string(),
                    context: context.to_string(),
                    pos,
                });
            }
        }
    }
    Ok(())
}

/// Parses a domain file.
pub fn parse_domain(text: &str) -> Result<Domain, ParseError> {
    let form = read_one(text)?;
    let top = form.expect_list("'(defdomain'")?;
    let rest = keyword(top, "defdomain", form.pos())?;
    let rest = exact(rest, 2, form.pos(), "defdomain")?;
    let name = ident(&rest[0], "domain name")?;
    let decls = rest[1].expect_list("declaration list")?;

    let mut domain = Domain {
        name,
        predicates: Vec::new(),
        operators: Vec::new(),
        methods: Vec::new(),
    };

    // Pass 1: predicates, operator signatures, method heads.
    struct Pending<'a> {
        kind: &'a str,
        body: &'a [Sexpr],
        pos: Pos,
    }
    let mut pending = Vec::new();
    for decl in decls {
        let items = decl.expect_list("declaration")?;
        let kw = items.first().and_then(Sexpr::as_symbol).unwrap_or("");
        match kw {
            ":predicate" => {
                let body = exact(&items[1..], 2, decl.pos(), ":predicate")?;
                let pname = ident(&body[0], "predicate name")?;
                let arity: usize = body[1]
                    .expect_symbol("arity")?
                    .parse()
                    .map_err(|_| ParseError::syntax(body[1].pos(), "non-negative integer arity"))?;
                if domain.predicate_arity(pname.as_str()).is_some() {
                    return Err(ParseError::DuplicatePredicate {
                        name: pname.to_string(),
                        pos: body[0].pos(),
                    });
                }
                domain.predicates.push((pname, arity));
            }
            ":operator" => {
                let body = exact(&items[1..], 4, decl.pos(), ":operator")?;
                let sig = body[0].expect_list("operator signature")?;
                let Some(h) = sig.first() else {
                    return Err(ParseError::syntax(body[0].pos(), "operator name"));
                };
                let oname = ident(h, "operator name")?;
                if domain.operator(oname.as_str()).is_some() {
                    return Err(ParseError::DuplicateOperator {
                        name: oname.to_string(),
                        pos: h.pos(),
                    });
                }
                let params = sig[1..]
                    .iter()
                    .map(variable)
                    .collect::<Result<Vec<_>, _>>()?;
                domain.operators.push(Operator {
                    name: oname,
                    params,
                    preconditions: vec![],
                    delete_list: vec![],
                    add_list: vec![],
                });
                pending.push(Pending {
                    kind: ":operator",
                    body,
                    pos: decl.pos(),
                });
            }
            ":method" => {
                let body = exact(&items[1..], 4, decl.pos(), ":method")?;
                let id = ident(&body[0], "method id")?;
                if domain.method(id.as_str()).is_some() {
                    return Err(ParseError::DuplicateMethodId {
                        id: id.to_string(),
                        pos: body[0].pos(),
                    });
                }
                let sig = body[1].expect_list("method head")?;
                let Some(h) = sig.first() else {
                    return Err(ParseError::syntax(body[1].pos(), "task name"));
                };
                let task = ident(h, "task name")?;
                let params = sig[1..]
                    .iter()
                    .map(variable)
                    .collect::<Result<Vec<_>, _>>()?;
                if let Some(prev) = domain.methods_for(task.as_str()).next() {
                    if prev.params.len() != params.len() {
                        return Err(ParseError::Arity {
                            name: task.to_string(),
                            expected: prev.params.len(),
                            found: params.len(),
                            pos: body[1].pos(),
                        });
                    }
                }
                domain.methods.push(Method {
                    id,
                    task,
                    params,
                    admissibility: vec![],
                    subtasks: vec![],
                });
                pending.push(Pending {
                    kind: ":method",
                    body,
                    pos: decl.pos(),
                });
            }
            _ => {
                return Err(ParseError::syntax(
                    items.first().map(Sexpr::pos).unwrap_or(decl.pos()),
                    "':predicate', ':operator' or ':method'",
                ))
            }
        }
    }
    for m in &domain.methods {
        if domain.operator(m.task.as_str()).is_some() {
            return Err(ParseError::MethodOnPrimitive {
                name: m.task.to_string(),
                pos: form.pos(),
            });
        }
    }

    // Pass 2: bodies, now that every name is known.
    let (mut oi, mut mi) = (0, 0);
    for p in pending {
        match p.kind {
            ":operator" => {
                let pre = conj(&p.body[1], &domain)?;
                let del = conj(&p.body[2], &domain)?;
                let add = conj(&p.body[3], &domain)?;
                let op = &domain.operators[oi];
                let bound: HashSet<Ident> = op.params.iter().cloned().collect();
                let ctx = format!("operator {} parameters", op.name);
                check_vars(&pre, &bound, &ctx, p.body[1].pos())?;
                check_vars(&del, &bound, &ctx, p.body[2].pos())?;
                check_vars(&add, &bound, &ctx, p.body[3].pos())?;
                if let Some(a) = add.iter().find(|a| del.contains(a)) {
                    return Err(ParseError::ConflictingEffects {
                        name: op.name.to_string(),
                        atom: a.to_string(),
                        pos: p.pos,
                    });
                }
                let op = &mut domain.operators[oi];
                op.preconditions = pre;
                op.delete_list = del;
                op.add_list = add;
                oi += 1;
            }
            _ => {
                let adm = conj(&p.body[2], &domain)?;
                let tasks_sx = p.body[3].expect_list("subtask list")?;
                let subtasks = tasks_sx
                    .iter()
                    .map(|t| task_expr(t, &domain))
                    .collect::<Result<Vec<_>, _>>()?;
                let m = &domain.methods[mi];
                let mut bound: HashSet<Ident> = m.params.iter().cloned().collect();
                for a in &adm {
                    bound.extend(a.variables().cloned());
                }
                let ctx = format!("method {} head or admissibility", m.id);
                check_vars(
                    subtasks
                        .iter()
                        .map(|t| t.as_atom())
                        .collect::<Vec<_>>()
                        .iter(),
                    &bound,
                    &ctx,
                    p.body[3].pos(),
                )?;
                let m = &mut domain.methods[mi];
                m.admissibility = adm;
                m.subtasks = subtasks;
                mi += 1;
            }
        }
    }
    Ok(domain)
}

/// Parses a problem file against an already-parsed domain.
pub fn parse_problem(text: &str, domain: &Domain) -> Result<Problem, ParseError> {
    let form = read_one(text)?;
    let top = form.expect_list("'(defproblem'")?;
    let rest = keyword(top, "defproblem", form.pos())?;
    let rest = exact(rest, 5, form.pos(), "defproblem")?;
    let name = ident(&rest[0], "problem name")?;
    let domain_ref = ident(&rest[1], "domain name")?;
    if domain_ref != domain.name {
        return Err(ParseError::DomainMismatch {
            expected: domain.name.to_string(),
            found: domain_ref.to_string(),
        });
    }
    let ground_atoms = |sx: &Sexpr, what: &str| -> Result<Vec<Atom>, ParseError> {
        let atoms = conj(sx, domain)?;
        for (a, s) in atoms.iter().zip(sx.as_list().unwrap_or(&[])) {
            if !a.is_ground() {
                return Err(ParseError::NotGround {
                    what: format!("{what} atom {a}"),
                    pos: s.pos(),
                });
            }
        }
        Ok(atoms)
    };
    let init = ground_atoms(&rest[2], "initial state")?;
    let task_items = rest[3].expect_list("initial task list")?;
    let mut tasks = Vec::new();
    for t in task_items {
        let task = task_expr(t, domain)?;
        if !task.is_ground() {
            return Err(ParseError::NotGround {
                what: format!("initial task {task}"),
                pos: t.pos(),
            });
        }
        tasks.push(task);
    }
    if tasks.is_empty() {
        return Err(ParseError::EmptyTaskList);
    }
    let goal = ground_atoms(&rest[4], "goal")?;

    let mut objects = BTreeSet::new();
    let consts = init
        .iter()
        .chain(goal.iter())
        .flat_map(|a| a.args.iter())
        .chain(tasks.iter().flat_map(|t| t.args.iter()));
    for t in consts {
        if let Term::Const(c) = t {
            objects.insert(c.clone());
        }
    }
    Ok(Problem {
        name,
        domain_ref,
        initial_state: State::from_atoms(init),
        initial_tasks: tasks,
        goal: goal.into_iter().collect(),
        objects,
    })
}

/// Parses one atom, e.g. `(On A B)`, against the domain's predicates.
pub fn parse_atom(text: &str, domain: &Domain) -> Result<Atom, ParseError> {
    atom(&read_one(text)?, domain)
}

/// Parses one task expression, e.g. `(Clear B)`.
pub fn parse_task(text: &str, domain: &Domain) -> Result<Task, ParseError> {
    task_expr(&read_one(text)?, domain)
}

/// Kind lookup for callers that build tasks by hand.
pub fn resolve_task(domain: &Domain, name: &str, args: Vec<Term>) -> Option<Task> {
    let kind = domain.task_kind(name)?;
    if domain.task_arity(name)? != args.len() {
        return None;
    }
    Some(Task {
        name: Ident::new(name),
        args,
        kind,
    })
}

impl TaskKind {
    pub fn as_str(self) -> &'static str {
        match self {
            TaskKind::Primitive => "primitive",
            TaskKind::NonPrimitive => "non-primitive",
        }
    }
}
