//! Display implementations in the model-file concrete syntax. Parsing the
//! printed form of a term or process yields the original value back.

use std::fmt;

use crate::config::{Configuration, Frame};
use crate::equivalence::{BisimFailure, BisimVerdict, Trace};
use crate::process::{ExtendedProcess, Process};
use crate::semantics::Label;
use crate::statics::EquivVerdict;
use crate::terms::Term;

// term printing levels: cons is loosest, then append, then primary
const LVL_CONS: u8 = 0;
const LVL_APPEND: u8 = 1;
const LVL_PRIMARY: u8 = 2;

fn write_term(t: &Term, lvl: u8, f: &mut fmt::Formatter<'_>) -> fmt::Result {
    match t {
        Term::Name(n) => write!(f, "{n}"),
        Term::Var(v) => write!(f, "{v}"),
        Term::App { sym, args, .. } => match (&**sym, args.len()) {
            ("pair", 2) => {
                write!(f, "(")?;
                write_term(&args[0], LVL_CONS, f)?;
                write!(f, ", ")?;
                write_term(&args[1], LVL_CONS, f)?;
                write!(f, ")")
            }
            ("cons", 2) => {
                let parens = lvl > LVL_CONS;
                if parens {
                    write!(f, "(")?;
                }
                write_term(&args[0], LVL_APPEND, f)?;
                write!(f, " :: ")?;
                write_term(&args[1], LVL_CONS, f)?;
                if parens {
                    write!(f, ")")?;
                }
                Ok(())
            }
            ("append", 2) => {
                let parens = lvl > LVL_APPEND;
                if parens {
                    write!(f, "(")?;
                }
                write_term(&args[0], LVL_APPEND, f)?;
                write!(f, " ++ ")?;
                write_term(&args[1], LVL_PRIMARY, f)?;
                if parens {
                    write!(f, ")")?;
                }
                Ok(())
            }
            (_, 0) => write!(f, "{sym}"),
            _ => {
                write!(f, "{sym}(")?;
                for (i, a) in args.iter().enumerate() {
                    if i > 0 {
                        write!(f, ", ")?;
                    }
                    write_term(a, LVL_CONS, f)?;
                }
                write!(f, ")")
            }
        },
    }
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write_term(self, LVL_CONS, f)
    }
}

/// Continuations are single prefix units; parallel compositions in that
/// position need parentheses.
fn write_continuation(p: &Process, f: &mut fmt::Formatter<'_>) -> fmt::Result {
    if matches!(p, Process::Par(..)) {
        write!(f, "(")?;
        write_process(p, f)?;
        write!(f, ")")
    } else {
        write_process(p, f)
    }
}

fn write_process(p: &Process, f: &mut fmt::Formatter<'_>) -> fmt::Result {
    match p {
        Process::Nil => write!(f, "0"),
        Process::Par(..) => {
            let mut parts = Vec::new();
            flatten_par(p, &mut parts);
            for (i, part) in parts.iter().enumerate() {
                if i > 0 {
                    write!(f, " | ")?;
                }
                write_process(part, f)?;
            }
            Ok(())
        }
        Process::Repl(q) => {
            write!(f, "!")?;
            write_continuation(q, f)
        }
        Process::ResName(n, q) => {
            write!(f, "new {n}; ")?;
            write_continuation(q, f)
        }
        Process::If { lhs, rhs, then_p, else_p } => {
            write!(f, "if {lhs} = {rhs} then ")?;
            // an else-less inner if would capture our else
            let inner_captures = matches!(
                &**then_p,
                Process::If { else_p: inner_else, .. } if matches!(**inner_else, Process::Nil)
            );
            let need_parens =
                matches!(**then_p, Process::Par(..)) || (!matches!(**else_p, Process::Nil) && inner_captures);
            if need_parens {
                write!(f, "(")?;
                write_process(then_p, f)?;
                write!(f, ")")?;
            } else {
                write_process(then_p, f)?;
            }
            if !matches!(**else_p, Process::Nil) {
                write!(f, " else ")?;
                write_continuation(else_p, f)?;
            }
            Ok(())
        }
        Process::In { chan, var, body } => {
            write!(f, "in({chan}, {var}); ")?;
            write_continuation(body, f)
        }
        Process::Out { chan, msg, body } => {
            write!(f, "out({chan}, {msg}); ")?;
            write_continuation(body, f)
        }
    }
}

fn flatten_par<'a>(p: &'a Process, out: &mut Vec<&'a Process>) {
    match p {
        Process::Par(a, b) => {
            flatten_par(a, out);
            flatten_par(b, out);
        }
        _ => out.push(p),
    }
}

impl fmt::Display for Process {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write_process(self, f)
    }
}

fn write_ext_continuation(p: &ExtendedProcess, f: &mut fmt::Formatter<'_>) -> fmt::Result {
    if matches!(p, ExtendedProcess::Par(..) | ExtendedProcess::Plain(Process::Par(..))) {
        write!(f, "(")?;
        write_extended(p, f)?;
        write!(f, ")")
    } else {
        write_extended(p, f)
    }
}

fn write_extended(p: &ExtendedProcess, f: &mut fmt::Formatter<'_>) -> fmt::Result {
    match p {
        ExtendedProcess::Plain(q) => write_process(q, f),
        ExtendedProcess::Par(..) => {
            let mut parts = Vec::new();
            flatten_ext_par(p, &mut parts);
            for (i, part) in parts.iter().enumerate() {
                if i > 0 {
                    write!(f, " | ")?;
                }
                write_extended(part, f)?;
            }
            Ok(())
        }
        ExtendedProcess::ResName(n, q) => {
            write!(f, "new {n}; ")?;
            write_ext_continuation(q, f)
        }
        ExtendedProcess::ResVar(v, q) => {
            write!(f, "new {v} : var; ")?;
            write_ext_continuation(q, f)
        }
        ExtendedProcess::Active(v, t) => write!(f, "{{{t}/{v}}}"),
    }
}

fn flatten_ext_par<'a>(p: &'a ExtendedProcess, out: &mut Vec<&'a ExtendedProcess>) {
    match p {
        ExtendedProcess::Par(a, b) => {
            flatten_ext_par(a, out);
            flatten_ext_par(b, out);
        }
        _ => out.push(p),
    }
}

impl fmt::Display for ExtendedProcess {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write_extended(self, f)
    }
}

impl fmt::Display for Frame {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for n in &self.restricted {
            write!(f, "new {n}; ")?;
        }
        write!(f, "{{ ")?;
        for (i, (v, t)) in self.subst.iter().enumerate() {
            if i > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{t}/{v}")?;
        }
        write!(f, " }}")
    }
}

impl fmt::Display for Configuration {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for n in &self.restricted {
            write!(f, "new {n}; ")?;
        }
        write!(f, "{{ ")?;
        for (i, (v, t)) in self.frame.iter().enumerate() {
            if i > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{t}/{v}")?;
        }
        write!(f, " }}")?;
        for p in &self.procs {
            write!(f, " | {p}")?;
        }
        Ok(())
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Label::Tau => write!(f, "tau"),
            Label::In { chan, msg } => write!(f, "in({chan}, {msg})"),
            Label::OutVar { chan, fresh } => write!(f, "nu {fresh}. out({chan}, {fresh})"),
            Label::OutRefined { chan, payload, opened } => {
                if opened.is_empty() {
                    write!(f, "out({chan}, {payload})")
                } else {
                    write!(f, "nu ")?;
                    for (i, v) in opened.iter().enumerate() {
                        if i > 0 {
                            write!(f, ",")?;
                        }
                        write!(f, "{v}")?;
                    }
                    write!(f, ". out({chan}, {payload})")
                }
            }
        }
    }
}

impl fmt::Display for Trace {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for step in &self.steps {
            match &step.label {
                Label::Tau => writeln!(f, "--tau-->")?,
                l => writeln!(f, "--[{l}]-->")?,
            }
            writeln!(f, "    frame: {}", crate::config::frame_of(&step.target))?;
        }
        Ok(())
    }
}

impl fmt::Display for EquivVerdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            EquivVerdict::Distinguished { test } => {
                write!(f, "DISTINGUISHED: {} == {}", test.0, test.1)
            }
            EquivVerdict::DomainMismatch { left_only, right_only } => {
                write!(f, "DISTINGUISHED: domains differ (")?;
                for v in left_only {
                    write!(f, " {v} only left")?;
                }
                for v in right_only {
                    write!(f, " {v} only right")?;
                }
                write!(f, " )")
            }
            EquivVerdict::EquivalentUpToBudget { budget } => {
                write!(
                    f,
                    "EQUIVALENT up to depth {} (count cap {})",
                    budget.max_depth,
                    budget
                        .max_count
                        .map(|c| c.to_string())
                        .unwrap_or_else(|| "none".to_string())
                )
            }
        }
    }
}

impl fmt::Display for BisimVerdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BisimVerdict::BisimilarUpToBounds { relation_size } => {
                write!(f, "BISIMILAR up to bounds (relation size {relation_size})")
            }
            BisimVerdict::NotBisimilar { trace, reason } => {
                writeln!(f, "NOT BISIMILAR")?;
                for label in trace {
                    match label {
                        Label::Tau => writeln!(f, "--tau-->")?,
                        l => writeln!(f, "--[{l}]-->")?,
                    }
                }
                match reason {
                    BisimFailure::StaticInequiv { test } => {
                        write!(f, "DISTINGUISHING TEST {} == {}", test.0, test.1)
                    }
                    BisimFailure::BarbMismatch { chan } => write!(f, "BARB {chan}"),
                    BisimFailure::NoMatchingMove { label } => {
                        write!(f, "UNMATCHED MOVE {label}")
                    }
                }
            }
        }
    }
}
