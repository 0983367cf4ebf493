use std::fmt::{self, Write};

use super::ast::{Command, Machine, OutOfDomain};
use crate::expr::write_value;
use crate::value::Value;

fn prec(c: &Command) -> u8 {
    match c {
        Command::Seq(..) => 1,
        Command::NDChoice(..) => 2,
        Command::PChoice(..) | Command::PChoiceAtMost(..) => 3,
        _ => 4,
    }
}

fn child(f: &mut fmt::Formatter<'_>, c: &Command, parent: u8) -> fmt::Result {
    if prec(c) <= parent {
        write!(f, "({c})")
    } else {
        write!(f, "{c}")
    }
}

impl fmt::Display for Command {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Command::Skip => write!(f, "skip"),
            Command::Assign(x, e) => write!(f, "{x} := {e}"),
            Command::MultiAssign(items) => {
                let xs: Vec<&str> = items.iter().map(|(x, _)| &**x).collect();
                let es: Vec<String> = items.iter().map(|(_, e)| e.to_string()).collect();
                write!(f, "{} := {}", xs.join(", "), es.join(", "))
            }
            Command::Seq(a, b) => {
                child(f, a, 1)?;
                write!(f, "; ")?;
                child(f, b, 1)
            }
            Command::NDChoice(a, b) => {
                child(f, a, 2)?;
                write!(f, " [] ")?;
                child(f, b, 2)
            }
            Command::PChoice(p, a, b) | Command::PChoiceAtMost(p, a, b) => {
                let kw = if matches!(self, Command::PChoice(..)) { "pchoice" } else { "pchoice<=" };
                child(f, a, 3)?;
                write!(f, " {kw} {p} or ")?;
                child(f, b, 3)
            }
            Command::Cond(g, a, b) => write!(f, "if {g} then {a} else {b} fi"),
            Command::WeakIter(c) => write!(f, "it {c} ti"),
            Command::While(g, c) => write!(f, "while {g} do {c} od"),
        }
    }
}

struct Literal<'a>(&'a Value);

impl fmt::Display for Literal<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write_value(f, self.0)
    }
}

/// Renders a machine in the concrete syntax; `parse(&print_machine(m)) == m`.
pub fn print_machine(m: &Machine) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "machine {}", m.name);
    for (n, v) in &m.consts {
        let _ = writeln!(out, "const {n} = {}", Literal(v));
    }
    for v in &m.vars {
        let domain = match &v.domain {
            super::ast::Domain::Set(items) => {
                let parts: Vec<String> = items.iter().map(|i| Literal(i).to_string()).collect();
                format!("{{{}}}", parts.join(", "))
            }
            d => d.to_string(),
        };
        let policy = if v.policy == OutOfDomain::Clamp { " clamp" } else { "" };
        let _ = writeln!(out, "var {} : {domain}{policy}", v.name);
    }
    let _ = writeln!(out, "init {}", m.init);
    for op in &m.ops {
        match &op.guard {
            Some(g) => {
                let _ = writeln!(out, "op {} when {g}\n  {}", op.name, op.body);
            }
            None => {
                let _ = writeln!(out, "op {}\n  {}", op.name, op.body);
            }
        }
    }
    if let Some((e, x)) = &m.expectations {
        let _ = writeln!(out, "expectations {e} => {x}");
    }
    out
}
