use std::fmt;

use crate::expr::Expr;
use crate::value::{Name, State, Value};

/// A probabilistic guarded command.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Command {
    Skip,
    Assign(Name, Expr),
    /// Simultaneous assignment; right-hand sides see the pre-state.
    MultiAssign(Vec<(Name, Expr)>),
    Seq(Box<Command>, Box<Command>),
    Cond(Expr, Box<Command>, Box<Command>),
    /// Left with probability `p`, right with `1 - p`.
    PChoice(Expr, Box<Command>, Box<Command>),
    /// Left with probability at most `p`: `(L p⊕ R) ⊓ R`.
    PChoiceAtMost(Expr, Box<Command>, Box<Command>),
    NDChoice(Box<Command>, Box<Command>),
    /// Zero or more iterations, count chosen demonically.
    WeakIter(Box<Command>),
    While(Expr, Box<Command>),
}

impl Command {
    pub fn assign(x: &str, e: Expr) -> Command {
        Command::Assign(Name::from(x), e)
    }

    pub fn seq(a: Command, b: Command) -> Command {
        Command::Seq(Box::new(a), Box::new(b))
    }

    /// Right-nested sequence of all items; `skip` when empty.
    pub fn seq_all(items: impl IntoIterator<Item = Command>) -> Command {
        let mut items: Vec<Command> = items.into_iter().collect();
        let Some(mut acc) = items.pop() else {
            return Command::Skip;
        };
        while let Some(c) = items.pop() {
            acc = Command::seq(c, acc);
        }
        acc
    }

    pub fn cond(p: Expr, a: Command, b: Command) -> Command {
        Command::Cond(p, Box::new(a), Box::new(b))
    }

    pub fn pchoice(p: Expr, a: Command, b: Command) -> Command {
        Command::PChoice(p, Box::new(a), Box::new(b))
    }

    pub fn pchoice_at_most(p: Expr, a: Command, b: Command) -> Command {
        Command::PChoiceAtMost(p, Box::new(a), Box::new(b))
    }

    pub fn nd(a: Command, b: Command) -> Command {
        Command::NDChoice(Box::new(a), Box::new(b))
    }

    pub fn weak_iter(c: Command) -> Command {
        Command::WeakIter(Box::new(c))
    }

    pub fn while_do(g: Expr, c: Command) -> Command {
        Command::While(g, Box::new(c))
    }

    pub fn contains_loop(&self) -> bool {
        match self {
            Command::Skip | Command::Assign(..) | Command::MultiAssign(_) => false,
            Command::WeakIter(_) | Command::While(..) => true,
            Command::Seq(a, b)
            | Command::Cond(_, a, b)
            | Command::PChoice(_, a, b)
            | Command::PChoiceAtMost(_, a, b)
            | Command::NDChoice(a, b) => a.contains_loop() || b.contains_loop(),
        }
    }

    /// Visits every expression in the command together with its role.
    pub fn visit_exprs<'a>(&'a self, f: &mut dyn FnMut(ExprRole<'a>, &'a Expr)) {
        match self {
            Command::Skip => {}
            Command::Assign(x, e) => f(ExprRole::Assigned(x), e),
            Command::MultiAssign(items) => {
                for (x, e) in items {
                    f(ExprRole::Assigned(x), e);
                }
            }
            Command::Seq(a, b) | Command::NDChoice(a, b) => {
                a.visit_exprs(f);
                b.visit_exprs(f);
            }
            Command::Cond(g, a, b) => {
                f(ExprRole::Guard, g);
                a.visit_exprs(f);
                b.visit_exprs(f);
            }
            Command::PChoice(p, a, b) | Command::PChoiceAtMost(p, a, b) => {
                f(ExprRole::Probability, p);
                a.visit_exprs(f);
                b.visit_exprs(f);
            }
            Command::WeakIter(c) => c.visit_exprs(f),
            Command::While(g, c) => {
                f(ExprRole::Guard, g);
                c.visit_exprs(f);
            }
        }
    }
}

#[derive(Clone, Copy, Debug)]
pub enum ExprRole<'a> {
    Assigned(&'a Name),
    Guard,
    Probability,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Domain {
    /// Inclusive integer interval.
    Range(i64, i64),
    Bool,
    /// Explicit finite set of literals, kept in declaration order.
    Set(Vec<Value>),
}

impl Domain {
    pub fn contains(&self, v: &Value) -> bool {
        match (self, v) {
            (Domain::Range(lo, hi), Value::Int(i)) => lo <= i && i <= hi,
            (Domain::Bool, Value::Bool(_)) => true,
            (Domain::Set(items), v) => items
                .iter()
                .any(|w| w.compare(v) == Some(std::cmp::Ordering::Equal)),
            _ => false,
        }
    }

    pub fn values(&self) -> Vec<Value> {
        match self {
            Domain::Range(lo, hi) => (*lo..=*hi).map(Value::Int).collect(),
            Domain::Bool => vec![Value::Bool(false), Value::Bool(true)],
            Domain::Set(items) => items.clone(),
        }
    }

    pub fn size(&self) -> u128 {
        match self {
            Domain::Range(lo, hi) => (i128::from(*hi) - i128::from(*lo) + 1).max(0) as u128,
            Domain::Bool => 2,
            Domain::Set(items) => items.len() as u128,
        }
    }

    pub fn is_bool(&self) -> bool {
        match self {
            Domain::Bool => true,
            Domain::Set(items) => items.iter().all(|v| !v.is_numeric()) && !items.is_empty(),
            Domain::Range(..) => false,
        }
    }
}

impl fmt::Display for Domain {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Domain::Range(lo, hi) => write!(f, "{lo}..{hi}"),
            Domain::Bool => write!(f, "bool"),
            Domain::Set(items) => {
                let parts: Vec<String> = items.iter().map(Value::to_string).collect();
                write!(f, "{{{}}}", parts.join(", "))
            }
        }
    }
}

/// What an assignment outside a variable's domain does.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash)]
pub enum OutOfDomain {
    /// The analysis reports an error.
    #[default]
    Error,
    /// The value saturates at the nearer interval bound.
    Clamp,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct VarDecl {
    pub name: Name,
    pub domain: Domain,
    pub policy: OutOfDomain,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Operation {
    pub name: Name,
    pub guard: Option<Expr>,
    pub body: Command,
}

impl Operation {
    /// Guard and body as executed in one step. A body that is a single
    /// `while g do c od` contributes `g` to the guard and runs `c` once.
    pub fn step_form(&self) -> (Expr, Command) {
        let base = self.guard.clone().unwrap_or_else(|| Expr::bool(true));
        match &self.body {
            Command::While(g, c) => {
                let guard = if self.guard.is_some() {
                    Expr::and(base, g.clone())
                } else {
                    g.clone()
                };
                (guard, (**c).clone())
            }
            body => (base, body.clone()),
        }
    }
}

/// An abstract machine: state variables over finite domains, an
/// initialisation, operations, and optionally an `E => Expt` clause.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Machine {
    pub name: Name,
    pub consts: Vec<(Name, Value)>,
    pub vars: Vec<VarDecl>,
    pub init: Command,
    pub ops: Vec<Operation>,
    pub expectations: Option<(Expr, Expr)>,
}

impl Machine {
    pub fn var_order(&self) -> Vec<Name> {
        self.vars.iter().map(|v| v.name.clone()).collect()
    }

    pub fn var(&self, name: &str) -> Option<&VarDecl> {
        self.vars.iter().find(|v| &*v.name == name)
    }

    pub fn op(&self, name: &str) -> Option<&Operation> {
        self.ops.iter().find(|o| &*o.name == name)
    }

    pub fn constant(&self, name: &str) -> Option<&Value> {
        self.consts.iter().find(|(n, _)| &**n == name).map(|(_, v)| v)
    }

    /// Number of states in the full product of variable domains.
    pub fn state_space_size(&self) -> u128 {
        self.vars
            .iter()
            .map(|v| v.domain.size())
            .fold(1u128, |a, b| a.saturating_mul(b))
    }

    /// Every state of the product of domains, in canonical order.
    pub fn state_space(&self) -> Vec<State> {
        let mut out = vec![State::new()];
        for v in &self.vars {
            let vals = v.domain.values();
            let mut next = Vec::with_capacity(out.len() * vals.len());
            for s in &out {
                for val in &vals {
                    next.push(s.with(&v.name, val.clone()));
                }
            }
            out = next;
        }
        out.sort();
        out
    }
}
