//! Weakest pre-expectations: symbolic transformer, pointwise evaluator,
//! annotation checks and proof obligations.

use std::collections::{BTreeMap, BTreeSet};

use thiserror::Error;

use crate::expr::{EvalError, Expr};
use crate::lang::{Command, Domain, Machine, OutOfDomain};
use crate::scalar::Scalar;
use crate::semantics::{probability, Env, ExecError};
use crate::value::{Name, State};

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum WpError {
    #[error("{0} has no closed-form pre-expectation; evaluate it pointwise or build the state space")]
    NeedsStateSpace(&'static str),
    #[error(transparent)]
    Exec(#[from] ExecError),
    #[error("fixpoint did not stabilise after {iterations} iterations (last iterates {previous} and {latest})")]
    NonTermination { iterations: usize, previous: String, latest: String },
    #[error("machine `{0}` has no expectations clause")]
    MissingExpectations(Name),
}

impl From<EvalError> for WpError {
    fn from(e: EvalError) -> Self {
        WpError::Exec(ExecError::Eval(e))
    }
}

/// Symbolic `wp(c, post)` for loop-free commands.
pub fn wp(c: &Command, post: &Expr) -> Result<Expr, WpError> {
    wp_in(c, post, &BTreeMap::new())
}

/// Symbolic `wp` where assignments to clamped variables saturate.
pub fn wp_for_machine(m: &Machine, c: &Command, post: &Expr) -> Result<Expr, WpError> {
    let clamps: BTreeMap<Name, (i64, i64)> = m
        .vars
        .iter()
        .filter_map(|v| match (v.policy, &v.domain) {
            (OutOfDomain::Clamp, Domain::Range(lo, hi)) => Some((v.name.clone(), (*lo, *hi))),
            _ => None,
        })
        .collect();
    wp_in(c, post, &clamps)
}

fn wp_in(c: &Command, post: &Expr, clamps: &BTreeMap<Name, (i64, i64)>) -> Result<Expr, WpError> {
    let saturate = |x: &Name, e: &Expr| match clamps.get(x) {
        Some((lo, hi)) => Expr::min(Expr::max(e.clone(), Expr::int(*lo)), Expr::int(*hi)),
        None => e.clone(),
    };
    Ok(match c {
        Command::Skip => post.clone(),
        Command::Assign(x, e) => post.subst_one(x, &saturate(x, e)),
        Command::MultiAssign(items) => {
            let map = items.iter().map(|(x, e)| (x.clone(), saturate(x, e))).collect();
            post.subst(&map)
        }
        Command::Seq(a, b) => {
            let mid = wp_in(b, post, clamps)?;
            wp_in(a, &mid, clamps)?
        }
        Command::Cond(g, a, b) => Expr::cond(
            g.clone(),
            wp_in(a, post, clamps)?,
            wp_in(b, post, clamps)?,
        ),
        Command::PChoice(p, a, b) => {
            let wa = wp_in(a, post, clamps)?;
            let wb = wp_in(b, post, clamps)?;
            (p.clone() * wa + (Expr::int(1) - p.clone()) * wb).fold()
        }
        Command::PChoiceAtMost(p, a, b) => {
            let wa = wp_in(a, post, clamps)?;
            let wb = wp_in(b, post, clamps)?;
            let mix = (p.clone() * wa + (Expr::int(1) - p.clone()) * wb.clone()).fold();
            Expr::min(mix, wb)
        }
        Command::NDChoice(a, b) => Expr::min(wp_in(a, post, clamps)?, wp_in(b, post, clamps)?),
        Command::WeakIter(_) => return Err(WpError::NeedsStateSpace("weak iteration")),
        Command::While(..) => return Err(WpError::NeedsStateSpace("while loop")),
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct WpOptions {
    /// Cap on greatest-fixpoint iterations for weak iteration.
    pub max_iters: usize,
}

impl Default for WpOptions {
    fn default() -> Self {
        WpOptions { max_iters: 1_000_000 }
    }
}

/// `wp(c, post)(s)` by direct evaluation. Weak iteration is computed as the
/// greatest fixpoint of `X = min(wp(body, X), post)` over the states
/// reachable from `s`, iterated downward from `post` until exactly stable.
pub fn eval_wp_at<S: Scalar>(c: &Command, post: &Expr, s: &State) -> Result<S, WpError> {
    eval_wp_with(c, &|t| Ok(post.eval_scalar::<S>(t)?), s, &Env::unconstrained(), WpOptions::default())
}

/// Pointwise `wp` with an arbitrary post-expectation function.
pub fn eval_wp_with<S: Scalar>(
    c: &Command,
    post: &dyn Fn(&State) -> Result<S, WpError>,
    s: &State,
    env: &Env,
    opts: WpOptions,
) -> Result<S, WpError> {
    match c {
        Command::Skip => post(s),
        Command::Assign(x, e) => post(&env.assign(&[(x.clone(), e.clone())], s)?),
        Command::MultiAssign(items) => post(&env.assign(items, s)?),
        Command::Seq(a, b) => eval_wp_with(a, &|t| eval_wp_with(b, post, t, env, opts), s, env, opts),
        Command::Cond(g, a, b) => {
            if g.eval_bool(s)? {
                eval_wp_with(a, post, s, env, opts)
            } else {
                eval_wp_with(b, post, s, env, opts)
            }
        }
        Command::PChoice(p, a, b) => mix(p, a, b, post, s, env, opts),
        Command::PChoiceAtMost(p, a, b) => {
            let m = mix(p, a, b, post, s, env, opts)?;
            Ok(m.min_of(eval_wp_with(b, post, s, env, opts)?))
        }
        Command::NDChoice(a, b) => {
            let wa = eval_wp_with(a, post, s, env, opts)?;
            Ok(wa.min_of(eval_wp_with(b, post, s, env, opts)?))
        }
        Command::WeakIter(body) => weak_iter_fixpoint(body, post, s, env, opts),
        Command::While(..) => Err(WpError::NeedsStateSpace("while loop")),
    }
}

fn mix<S: Scalar>(
    p: &Expr,
    a: &Command,
    b: &Command,
    post: &dyn Fn(&State) -> Result<S, WpError>,
    s: &State,
    env: &Env,
    opts: WpOptions,
) -> Result<S, WpError> {
    let r = probability(p, s)?;
    if r == num_traits::Zero::zero() {
        return eval_wp_with(b, post, s, env, opts);
    }
    if r == num_traits::One::one() {
        return eval_wp_with(a, post, s, env, opts);
    }
    let p = S::from_rational(&r);
    let wa = eval_wp_with(a, post, s, env, opts)?;
    let wb = eval_wp_with(b, post, s, env, opts)?;
    Ok(p.clone() * wa + (S::one() - p) * wb)
}

fn weak_iter_fixpoint<S: Scalar>(
    body: &Command,
    post: &dyn Fn(&State) -> Result<S, WpError>,
    s: &State,
    env: &Env,
    opts: WpOptions,
) -> Result<S, WpError> {
    let mut region = BTreeSet::from([s.clone()]);
    let mut frontier = vec![s.clone()];
    while let Some(t) = frontier.pop() {
        for u in reach(body, &t, env)? {
            if region.insert(u.clone()) {
                frontier.push(u);
            }
        }
    }
    let floor: BTreeMap<State, S> = region
        .iter()
        .map(|t| Ok((t.clone(), post(t)?)))
        .collect::<Result<_, WpError>>()?;
    let mut x = floor.clone();
    for _ in 0..opts.max_iters {
        let lookup = |t: &State| -> Result<S, WpError> {
            Ok(x.get(t).cloned().expect("successor inside the reachable region"))
        };
        let mut next = BTreeMap::new();
        for t in &region {
            let v = eval_wp_with(body, &lookup, t, env, opts)?.min_of(floor[t].clone());
            next.insert(t.clone(), v);
        }
        let stable = next.iter().all(|(t, v)| {
            let old = &x[t];
            if S::EXACT {
                v == old
            } else {
                v.approx_eq(old)
            }
        });
        if stable {
            return Ok(next[s].clone());
        }
        x = next;
    }
    let previous = x[s].clone();
    let lookup = |t: &State| -> Result<S, WpError> { Ok(x[t].clone()) };
    let latest = eval_wp_with(body, &lookup, s, env, opts)?.min_of(floor[s].clone());
    Err(WpError::NonTermination {
        iterations: opts.max_iters,
        previous: previous.to_string(),
        latest: latest.to_string(),
    })
}

/// States any run of `c` from `s` can end in.
fn reach(c: &Command, s: &State, env: &Env) -> Result<BTreeSet<State>, WpError> {
    let one = |t: State| Ok(BTreeSet::from([t]));
    match c {
        Command::Skip => one(s.clone()),
        Command::Assign(x, e) => one(env.assign(&[(x.clone(), e.clone())], s)?),
        Command::MultiAssign(items) => one(env.assign(items, s)?),
        Command::Seq(a, b) => {
            let mut out = BTreeSet::new();
            for t in reach(a, s, env)? {
                out.extend(reach(b, &t, env)?);
            }
            Ok(out)
        }
        Command::Cond(g, a, b) => {
            if g.eval_bool(s)? {
                reach(a, s, env)
            } else {
                reach(b, s, env)
            }
        }
        Command::PChoice(p, a, b) | Command::PChoiceAtMost(p, a, b) => {
            let r = probability(p, s)?;
            let mut out = BTreeSet::new();
            if r != num_traits::Zero::zero() {
                out.extend(reach(a, s, env)?);
            }
            if r != num_traits::One::one() || matches!(c, Command::PChoiceAtMost(..)) {
                out.extend(reach(b, s, env)?);
            }
            Ok(out)
        }
        Command::NDChoice(a, b) => {
            let mut out = reach(a, s, env)?;
            out.extend(reach(b, s, env)?);
            Ok(out)
        }
        Command::WeakIter(body) => {
            let mut seen = BTreeSet::from([s.clone()]);
            let mut frontier = vec![s.clone()];
            while let Some(t) = frontier.pop() {
                for u in reach(body, &t, env)? {
                    if seen.insert(u.clone()) {
                        frontier.push(u);
                    }
                }
            }
            Ok(seen)
        }
        Command::While(..) => Err(WpError::NeedsStateSpace("while loop")),
    }
}

/// A Hoare-style triple `{pre} prog {post}` over expectations.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Annotation {
    pub pre: Expr,
    pub prog: Command,
    pub post: Expr,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Witness<S> {
    pub state: State,
    /// Value of the pre-expectation.
    pub pre: S,
    /// Value of `wp(prog, post)`.
    pub wp: S,
}

#[derive(Clone, Debug, PartialEq)]
pub struct AnnotationVerdict<S> {
    pub valid: bool,
    /// States where `pre > wp`, in canonical order.
    pub witnesses: Vec<Witness<S>>,
}

/// Checks `pre ≤ wp(prog, post)` at every listed state.
pub fn check_annotation<S: Scalar>(
    a: &Annotation,
    states: &[State],
    env: &Env,
) -> Result<AnnotationVerdict<S>, WpError> {
    let mut sorted: Vec<&State> = states.iter().collect();
    sorted.sort();
    sorted.dedup();
    let post = |t: &State| -> Result<S, WpError> { Ok(a.post.eval_scalar::<S>(t)?) };
    let mut witnesses = Vec::new();
    for s in sorted {
        let pre: S = a.pre.eval_scalar(s)?;
        let w = eval_wp_with(&a.prog, &post, s, env, WpOptions::default())?;
        if pre > w && !pre.approx_eq(&w) {
            witnesses.push(Witness { state: s.clone(), pre, wp: w });
        }
    }
    Ok(AnnotationVerdict { valid: witnesses.is_empty(), witnesses })
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Obligation {
    /// `init` or the operation name.
    pub name: Name,
    pub annotation: Annotation,
}

/// `{E} init {Expt}` followed by `{lift(guard) * Expt} op {Expt}` for each
/// operation, in declaration order.
pub fn proof_obligations(m: &Machine) -> Result<Vec<Obligation>, WpError> {
    let (e, expt) = m
        .expectations
        .clone()
        .ok_or_else(|| WpError::MissingExpectations(m.name.clone()))?;
    let mut out = vec![Obligation {
        name: Name::from("init"),
        annotation: Annotation { pre: e, prog: m.init.clone(), post: expt.clone() },
    }];
    for op in &m.ops {
        let (guard, body) = op.step_form();
        let pre = match &guard {
            Expr::Const(crate::value::Value::Bool(true)) => expt.clone(),
            g => Expr::lift(g.clone()) * expt.clone(),
        };
        out.push(Obligation {
            name: op.name.clone(),
            annotation: Annotation { pre, prog: body, post: expt.clone() },
        });
    }
    Ok(out)
}

/// Checks every proof obligation over the machine's state space. An
/// operation's obligation is checked only where its guard holds, since the
/// pre-expectation vanishes elsewhere and the body need not be defined there.
pub fn check_obligations<S: Scalar>(
    m: &Machine,
) -> Result<Vec<(Obligation, AnnotationVerdict<S>)>, WpError> {
    let env = Env::of_machine(m);
    let states = m.state_space();
    let guards: Vec<Expr> = m.ops.iter().map(|op| op.step_form().0).collect();
    proof_obligations(m)?
        .into_iter()
        .enumerate()
        .map(|(i, o)| {
            let v = match i.checked_sub(1).map(|j| &guards[j]) {
                None => check_annotation(&o.annotation, &states, &env)?,
                Some(g) => {
                    let enabled = states
                        .iter()
                        .filter_map(|s| g.eval_bool(s).map(|b| b.then(|| s.clone())).transpose())
                        .collect::<Result<Vec<_>, _>>()?;
                    check_annotation(&o.annotation, &enabled, &env)?
                }
            };
            Ok((o, v))
        })
        .collect()
}

/// Tests `wp(p, E) ≤ wp(q, E)` for each listed `E` at each listed state.
///
/// This is a finite under-approximation of refinement: passing says nothing
/// about expectations or states that were not listed.
pub fn check_refinement_on<S: Scalar>(
    expectations: &[Expr],
    p: &Command,
    q: &Command,
    states: &[State],
    env: &Env,
) -> Result<Vec<AnnotationVerdict<S>>, WpError> {
    let mut sorted: Vec<&State> = states.iter().collect();
    sorted.sort();
    sorted.dedup();
    expectations
        .iter()
        .map(|e| {
            let post = |t: &State| -> Result<S, WpError> { Ok(e.eval_scalar::<S>(t)?) };
            let mut witnesses = Vec::new();
            for s in &sorted {
                let lhs = eval_wp_with(p, &post, s, env, WpOptions::default())?;
                let rhs = eval_wp_with(q, &post, s, env, WpOptions::default())?;
                if lhs > rhs && !lhs.approx_eq(&rhs) {
                    witnesses.push(Witness { state: (*s).clone(), pre: lhs, wp: rhs });
                }
            }
            Ok(AnnotationVerdict { valid: witnesses.is_empty(), witnesses })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lang::{parse_command, parse_expr};
    use crate::scalar::ratio;
    use num_rational::BigRational;

    fn s(v: i64) -> State {
        State::from_pairs([("s", v)])
    }

    #[test]
    fn pinc_row() {
        let c = parse_command("s := s + 1 pchoice p or s := s - 1").unwrap();
        let post = parse_expr("lift[s = 0]").unwrap();
        let w = wp(&c, &post).unwrap();
        let at = |v: i64, p: BigRational| -> BigRational {
            let st = s(v).with("p", crate::value::Value::number(p));
            w.eval_scalar(&st).unwrap()
        };
        assert_eq!(at(-1, ratio(1, 3)), ratio(1, 3));
        assert_eq!(at(1, ratio(1, 3)), ratio(2, 3));
        assert_eq!(at(0, ratio(1, 3)), ratio(0, 1));
    }

    #[test]
    fn weak_iteration_reaches_zero() {
        let c = parse_command("it (x := 0 [] skip) ti").unwrap();
        let v: BigRational = eval_wp_at(&c, &Expr::var("x"), &State::from_pairs([("x", 5i64)])).unwrap();
        assert_eq!(v, ratio(0, 1));
    }

    #[test]
    fn symbolic_refuses_loops() {
        let c = parse_command("it x := x - 1 ti").unwrap();
        assert_eq!(wp(&c, &Expr::var("x")), Err(WpError::NeedsStateSpace("weak iteration")));
    }

    #[test]
    fn non_termination_is_reported() {
        let c = parse_command("it x := min(x + 1, 30) pchoice 1/2 or x := 0 ti").unwrap();
        let post = parse_expr("lift[x < 30]").unwrap();
        let out = eval_wp_with::<BigRational>(
            &c,
            &|t| Ok(post.eval_scalar(t)?),
            &State::from_pairs([("x", 0i64)]),
            &Env::unconstrained(),
            WpOptions { max_iters: 3 },
        );
        assert!(matches!(out, Err(WpError::NonTermination { iterations: 3, .. })), "{out:?}");
    }
}
