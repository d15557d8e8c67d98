use thiserror::Error;

use crate::sexpr::Pos;
use crate::term::Atom;

/// Errors raised while reading domain, problem, preference and oracle text.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum ParseError {
    #[error("syntax error at {pos}: expected {expected}")]
    Syntax { pos: Pos, expected: String },

    #[error("invalid identifier {name:?} at {pos}")]
    InvalidIdentifier { name: String, pos: Pos },

    #[error("arity error at {pos}: {name} takes {expected} argument(s), got {found}")]
    Arity {
        name: String,
        expected: usize,
        found: usize,
        pos: Pos,
    },

    #[error("undeclared predicate {name} at {pos}")]
    UndeclaredPredicate { name: String, pos: Pos },

    #[error("duplicate predicate declaration {name} at {pos}")]
    DuplicatePredicate { name: String, pos: Pos },

    #[error("duplicate operator {name} at {pos}")]
    DuplicateOperator { name: String, pos: Pos },

    #[error("duplicate method id {id} at {pos}")]
    DuplicateMethodId { id: String, pos: Pos },

    #[error("duplicate id {id} at {pos}")]
    DuplicateId { id: String, pos: Pos },

    #[error("unknown task {name} at {pos}")]
    UnknownTask { name: String, pos: Pos },

    #[error("unknown method id {id} at {pos}")]
    UnknownMethodId { id: String, pos: Pos },

    #[error("method {id} is both preferred and avoided at {pos}")]
    Overlap { id: String, pos: Pos },

    #[error("method {id} does not decompose task {task} at {pos}")]
    TaskMismatch { id: String, task: String, pos: Pos },

    #[error("variable ?{var} is not bound by {context} at {pos}")]
    UnboundVariable {
        var: String,
        context: String,
        pos: Pos,
    },

    #[error("{what} must be ground at {pos}")]
    NotGround { what: String, pos: Pos },

    #[error("operator {name} adds and deletes {atom} at {pos}")]
    ConflictingEffects {
        name: String,
        atom: String,
        pos: Pos,
    },

    #[error("{name} names an operator and cannot head a method at {pos}")]
    MethodOnPrimitive { name: String, pos: Pos },

    #[error("problem refers to domain {found}, loaded domain is {expected}")]
    DomainMismatch { expected: String, found: String },

    #[error("problem has no initial tasks")]
    EmptyTaskList,
}

impl ParseError {
    pub fn syntax(pos: Pos, expected: &str) -> Self {
        ParseError::Syntax {
            pos,
            expected: expected.to_string(),
        }
    }

    /// 1-based line of the error, when it has a position.
    pub fn line(&self) -> Option<usize> {
        self.pos().map(|p| p.line)
    }

    /// Source position of the error, when it has one.
    pub fn pos(&self) -> Option<Pos> {
        use ParseError::*;
        match self {
            Syntax { pos, .. }
            | InvalidIdentifier { pos, .. }
            | Arity { pos, .. }
            | UndeclaredPredicate { pos, .. }
            | DuplicatePredicate { pos, .. }
            | DuplicateOperator { pos, .. }
            | DuplicateMethodId { pos, .. }
            | DuplicateId { pos, .. }
            | UnknownTask { pos, .. }
            | UnknownMethodId { pos, .. }
            | Overlap { pos, .. }
            | TaskMismatch { pos, .. }
            | UnboundVariable { pos, .. }
            | NotGround { pos, .. }
            | ConflictingEffects { pos, .. }
            | MethodOnPrimitive { pos, .. } => Some(*pos),
            DomainMismatch { .. } | EmptyTaskList => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ApplyError {
    #[error("preconditions of {operator} not satisfied: {}", fmt_atoms(.missing))]
    PreconditionFailure {
        operator: String,
        missing: Vec<Atom>,
    },

    #[error("variable ?{var} of {operator} is unbound")]
    UnboundVariable { operator: String, var: String },

    /// The grounding makes an atom both added and deleted.
    #[error("{operator} would add and delete {}", fmt_atoms(.atoms))]
    ConflictingEffects { operator: String, atoms: Vec<Atom> },

    #[error("no operator named {0}")]
    UnknownOperator(String),
}

fn fmt_atoms(atoms: &[Atom]) -> String {
    atoms
        .iter()
        .map(|a| a.to_string())
        .collect::<Vec<_>>()
        .join(" ")
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PolicyError {
    #[error("cannot build a distribution from zero scores")]
    EmptyScores,
    #[error("not a probability distribution (sum {sum})")]
    NotADistribution { sum: f64 },
    #[error("no admissible methods")]
    NoAdmissibleMethods,
    #[error("temperature must be positive, got {0}")]
    InvalidTemperature(f64),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum StoreError {
    #[error("unknown preference id {0}")]
    UnknownPreferenceId(String),
    #[error("duplicate preference id {0}")]
    DuplicateId(String),
}

#[derive(Debug, Error)]
pub enum FileError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Parse { path: String, source: ParseError },
}
