//! Static checks and syntactic rewrites.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use super::ast::{Command, Domain, ExprRole, Machine, OutOfDomain, VarDecl};
use super::Diagnostic;
use crate::expr::{is_probability, Expr, Ty};
use crate::value::{Name, State, Value};

/// State spaces larger than this skip the exhaustive domain check.
const DOMAIN_CHECK_LIMIT: u128 = 2_000_000;

/// Rewrites `L pchoice<= p or R` into `(L pchoice p or R) [] R` everywhere.
pub fn desugar_atmost(c: &Command) -> Command {
    let go = |x: &Command| Box::new(desugar_atmost(x));
    match c {
        Command::Skip | Command::Assign(..) | Command::MultiAssign(_) => c.clone(),
        Command::Seq(a, b) => Command::Seq(go(a), go(b)),
        Command::Cond(g, a, b) => Command::Cond(g.clone(), go(a), go(b)),
        Command::PChoice(p, a, b) => Command::PChoice(p.clone(), go(a), go(b)),
        Command::PChoiceAtMost(p, a, b) => {
            let right = go(b);
            Command::NDChoice(Box::new(Command::PChoice(p.clone(), go(a), right.clone())), right)
        }
        Command::NDChoice(a, b) => Command::NDChoice(go(a), go(b)),
        Command::WeakIter(b) => Command::WeakIter(go(b)),
        Command::While(g, b) => Command::While(g.clone(), go(b)),
    }
}

/// Type and domain diagnostics for a parsed machine.
///
/// The domain check enumerates every state of the declared product space
/// where an operation is enabled and follows every branch of its body.
pub fn typecheck(m: &Machine) -> Vec<Diagnostic> {
    let decls: HashMap<Name, &VarDecl> = m.vars.iter().map(|v| (v.name.clone(), v)).collect();
    let var_ty = |n: &str| -> Option<Ty> {
        decls.get(n).map(|d| if d.domain.is_bool() { Ty::Bool } else { Ty::Num })
    };
    let mut diags = Vec::new();

    for v in &m.vars {
        if v.policy == OutOfDomain::Clamp && !matches!(v.domain, Domain::Range(..)) {
            diags.push(Diagnostic::semantic(format!(
                "variable `{}`: clamp needs an integer range domain, found {}",
                v.name, v.domain
            )));
        }
    }

    let check_cmd = |ctx: &str, c: &Command, diags: &mut Vec<Diagnostic>| {
        c.visit_exprs(&mut |role, e| {
            let want = match role {
                ExprRole::Assigned(x) => match var_ty(x) {
                    Some(t) => t,
                    None => {
                        diags.push(Diagnostic::semantic(format!("{ctx}: unknown variable `{x}`")));
                        return;
                    }
                },
                ExprRole::Guard => Ty::Bool,
                ExprRole::Probability => Ty::Num,
            };
            match e.infer(&var_ty) {
                Ok(t) if t == want => {}
                Ok(t) => {
                    let what = match role {
                        ExprRole::Assigned(x) => format!("assigning {t} `{e}` to {want} variable `{x}`"),
                        ExprRole::Guard => format!("condition `{e}` has type {t}"),
                        ExprRole::Probability => format!("probability `{e}` has type {t}"),
                    };
                    diags.push(Diagnostic::semantic(format!("{ctx}: type mismatch: {what}")));
                }
                Err(msg) => diags.push(Diagnostic::semantic(format!("{ctx}: {msg}"))),
            }
        });
    };

    check_cmd("init", &m.init, &mut diags);
    for op in &m.ops {
        let ctx = format!("operation `{}`", op.name);
        if let Some(g) = &op.guard {
            match g.infer(&var_ty) {
                Ok(Ty::Bool) => {}
                Ok(t) => diags.push(Diagnostic::semantic(format!("{ctx}: guard has type {t}"))),
                Err(msg) => diags.push(Diagnostic::semantic(format!("{ctx}: {msg}"))),
            }
        }
        check_cmd(&ctx, &op.body, &mut diags);
    }
    if let Some((e, x)) = &m.expectations {
        for (side, ex) in [("pre-expectation", e), ("invariant expectation", x)] {
            match ex.infer(&var_ty) {
                Ok(Ty::Num) => {}
                Ok(t) => diags.push(Diagnostic::semantic(format!("{side} `{ex}` has type {t}"))),
                Err(msg) => diags.push(Diagnostic::semantic(format!("{side}: {msg}"))),
            }
        }
    }
    if !diags.is_empty() || m.state_space_size() > DOMAIN_CHECK_LIMIT {
        return diags;
    }

    let mut probs = Problems::default();
    let default: State = m
        .vars
        .iter()
        .fold(State::new(), |s, v| s.with(&v.name, v.domain.values()[0].clone()));
    let walker = Walker { decls: &decls };
    walker.explore(&m.init, &default, "init", &mut probs);
    let space = m.state_space();
    for op in &m.ops {
        let ctx = format!("operation `{}`", op.name);
        let (guard, body) = op.step_form();
        for s in &space {
            match guard.eval_bool(s) {
                Ok(true) => {
                    walker.explore(&body, s, &ctx, &mut probs);
                }
                Ok(false) => {}
                Err(e) => probs.note(&ctx, "guard", format!("guard fails at {s}: {e}")),
            }
        }
    }
    diags.extend(probs.into_diagnostics());
    diags
}

#[derive(Default)]
struct Problems {
    // First example per (context, subject), in discovery order.
    seen: BTreeMap<(String, String), String>,
    order: Vec<(String, String)>,
}

impl Problems {
    fn note(&mut self, ctx: &str, subject: &str, msg: String) {
        let key = (ctx.to_string(), subject.to_string());
        if !self.seen.contains_key(&key) {
            self.order.push(key.clone());
            self.seen.insert(key, msg);
        }
    }

    fn into_diagnostics(mut self) -> Vec<Diagnostic> {
        self.order
            .iter()
            .map(|k| {
                let msg = self.seen.remove(k).unwrap_or_default();
                Diagnostic::semantic(format!("{}: {msg}", k.0))
            })
            .collect()
    }
}

struct Walker<'a> {
    decls: &'a HashMap<Name, &'a VarDecl>,
}

impl Walker<'_> {
    /// All states reachable by running `c` from `s`; dead paths are dropped.
    fn explore(&self, c: &Command, s: &State, ctx: &str, out: &mut Problems) -> BTreeSet<State> {
        let one = |s: State| BTreeSet::from([s]);
        match c {
            Command::Skip => one(s.clone()),
            Command::Assign(x, e) => match self.assign(&[(x.clone(), e.clone())], s, ctx, out) {
                Some(t) => one(t),
                None => BTreeSet::new(),
            },
            Command::MultiAssign(items) => match self.assign(items, s, ctx, out) {
                Some(t) => one(t),
                None => BTreeSet::new(),
            },
            Command::Seq(a, b) => self
                .explore(a, s, ctx, out)
                .iter()
                .flat_map(|t| self.explore(b, t, ctx, out))
                .collect(),
            Command::Cond(g, a, b) => match g.eval_bool(s) {
                Ok(true) => self.explore(a, s, ctx, out),
                Ok(false) => self.explore(b, s, ctx, out),
                Err(e) => {
                    out.note(ctx, "condition", format!("condition `{g}` fails at {s}: {e}"));
                    BTreeSet::new()
                }
            },
            Command::PChoice(p, a, b) | Command::PChoiceAtMost(p, a, b) => {
                let (mut left, mut right) = (true, true);
                match p.eval(s) {
                    Ok(v) if is_probability(&v) => {
                        let r = v.as_rational().unwrap_or_default();
                        left = r != num_traits::Zero::zero();
                        right = r != num_traits::One::one() || matches!(c, Command::PChoiceAtMost(..));
                    }
                    Ok(v) => out.note(
                        ctx,
                        "probability",
                        format!("probability `{p}` evaluates to {v}, outside [0, 1], at {s}"),
                    ),
                    Err(e) => out.note(ctx, "probability", format!("probability `{p}` fails at {s}: {e}")),
                }
                let mut res = BTreeSet::new();
                if left {
                    res.extend(self.explore(a, s, ctx, out));
                }
                if right {
                    res.extend(self.explore(b, s, ctx, out));
                }
                res
            }
            Command::NDChoice(a, b) => {
                let mut res = self.explore(a, s, ctx, out);
                res.extend(self.explore(b, s, ctx, out));
                res
            }
            Command::WeakIter(body) => {
                let mut seen = BTreeSet::from([s.clone()]);
                let mut frontier = vec![s.clone()];
                while let Some(t) = frontier.pop() {
                    for u in self.explore(body, &t, ctx, out) {
                        if seen.insert(u.clone()) {
                            frontier.push(u);
                        }
                    }
                }
                seen
            }
            Command::While(g, body) => {
                let mut seen = BTreeSet::from([s.clone()]);
                let mut frontier = vec![s.clone()];
                let mut exits = BTreeSet::new();
                while let Some(t) = frontier.pop() {
                    match g.eval_bool(&t) {
                        Ok(true) => {
                            for u in self.explore(body, &t, ctx, out) {
                                if seen.insert(u.clone()) {
                                    frontier.push(u);
                                }
                            }
                        }
                        Ok(false) => {
                            exits.insert(t);
                        }
                        Err(e) => out.note(ctx, "condition", format!("loop guard `{g}` fails at {t}: {e}")),
                    }
                }
                exits
            }
        }
    }

    fn assign(&self, items: &[(Name, Expr)], s: &State, ctx: &str, out: &mut Problems) -> Option<State> {
        let mut t = s.clone();
        for (x, e) in items {
            let v = match e.eval(s) {
                Ok(v) => v,
                Err(err) => {
                    out.note(ctx, x, format!("`{x} := {e}` fails at {s}: {err}"));
                    return None;
                }
            };
            let Some(decl) = self.decls.get(x) else {
                t.set(x.clone(), v);
                continue;
            };
            if decl.domain.contains(&v) {
                t.set(x.clone(), v);
                continue;
            }
            match (decl.policy, &decl.domain, &v) {
                (OutOfDomain::Clamp, Domain::Range(lo, hi), Value::Int(i)) => {
                    t.set(x.clone(), Value::Int((*i).clamp(*lo, *hi)));
                }
                _ => {
                    out.note(
                        ctx,
                        x,
                        format!(
                            "can drive `{x}` outside its domain {}: `{x} := {e}` yields {v} at {s}",
                            decl.domain
                        ),
                    );
                    return None;
                }
            }
        }
        Some(t)
    }
}
