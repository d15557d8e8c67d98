//! Canonical text rendering of domains and problems; output reparses to an
//! equal value.

use std::fmt::{self, Write as _};

use crate::domain::{Domain, Problem, Task};
use crate::term::Atom;

fn conj(atoms: impl IntoIterator<Item = impl std::borrow::Borrow<Atom>>) -> String {
    let mut s = String::from("(");
    for (i, a) in atoms.into_iter().enumerate() {
        if i > 0 {
            s.push(' ');
        }
        let _ = write!(s, "{}", a.borrow());
    }
    s.push(')');
    s
}

fn tasks(ts: &[Task]) -> String {
    let parts: Vec<String> = ts.iter().map(Task::to_string).collect();
    format!("({})", parts.join(" "))
}

impl fmt::Display for Domain {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "(defdomain {}", self.name)?;
        writeln!(f, "  (")?;
        for (p, n) in &self.predicates {
            writeln!(f, "   (:predicate {p} {n})")?;
        }
        for op in &self.operators {
            write!(f, "   (:operator ({}", op.name)?;
            for p in &op.params {
                write!(f, " ?{p}")?;
            }
            writeln!(f, ")")?;
            writeln!(f, "     {}", conj(&op.preconditions))?;
            writeln!(f, "     {}", conj(&op.delete_list))?;
            writeln!(f, "     {})", conj(&op.add_list))?;
        }
        for m in &self.methods {
            writeln!(f, "   (:method {} {}", m.id, m.head())?;
            writeln!(f, "     {}", conj(&m.admissibility))?;
            writeln!(f, "     {})", tasks(&m.subtasks))?;
        }
        writeln!(f, "  ))")
    }
}

impl fmt::Display for Problem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "(defproblem {} {}", self.name, self.domain_ref)?;
        writeln!(f, "  {}", conj(self.initial_state.iter()))?;
        writeln!(f, "  {}", tasks(&self.initial_tasks))?;
        writeln!(f, "  {})", conj(self.goal.iter()))
    }
}
