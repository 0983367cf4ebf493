//! Operational one-step semantics of loop-free commands.
//!
//! A command run from a state denotes a finite set of output distributions,
//! one per resolution of its demonic choices. Resolutions inside a
//! probabilistic branch are chosen independently of the other branches.

use std::collections::BTreeMap;

use num_rational::BigRational;
use thiserror::Error;

use crate::distribution::Distribution;
use crate::expr::{is_probability, EvalError, Expr};
use crate::lang::{Command, Domain, Machine, OutOfDomain};
use crate::scalar::Scalar;
use crate::value::{Name, State, Value};

/// Resolution sets larger than this abort with [`ExecError::TooManyResolutions`].
pub const MAX_RESOLUTIONS: usize = 4096;

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum ExecError {
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error("assignment `{var} := {value}` leaves the domain {domain} at {state}")]
    OutOfDomain { var: Name, value: Value, domain: Box<Domain>, state: Box<State> },
    #[error("probability {value} is outside [0, 1] at {state}")]
    BadProbability { value: Value, state: Box<State> },
    #[error("{0}: loops are analysed over the state space, not inside one step")]
    Loop(&'static str),
    #[error("more than {MAX_RESOLUTIONS} distinct resolutions of nondeterminism at {0}")]
    TooManyResolutions(State),
}

/// Variable domains and out-of-domain policies. Unlisted variables are
/// unconstrained.
#[derive(Clone, Debug, Default)]
pub struct Env {
    vars: BTreeMap<Name, (Domain, OutOfDomain)>,
}

impl Env {
    pub fn unconstrained() -> Self {
        Env::default()
    }

    pub fn of_machine(m: &Machine) -> Self {
        let vars = m
            .vars
            .iter()
            .map(|v| (v.name.clone(), (v.domain.clone(), v.policy)))
            .collect();
        Env { vars }
    }

    /// Applies the domain policy to an assigned value.
    pub fn admit(&self, var: &Name, value: Value, state: &State) -> Result<Value, ExecError> {
        let Some((domain, policy)) = self.vars.get(var) else {
            return Ok(value);
        };
        if domain.contains(&value) {
            return Ok(value);
        }
        if let (OutOfDomain::Clamp, Domain::Range(lo, hi), Value::Int(i)) = (policy, domain, &value) {
            return Ok(Value::Int((*i).clamp(*lo, *hi)));
        }
        Err(ExecError::OutOfDomain {
            var: var.clone(),
            value,
            domain: Box::new(domain.clone()),
            state: Box::new(state.clone()),
        })
    }

    /// Runs a (simultaneous) assignment.
    pub fn assign(&self, items: &[(Name, Expr)], s: &State) -> Result<State, ExecError> {
        let values: Vec<Value> = items.iter().map(|(_, e)| e.eval(s)).collect::<Result<_, _>>()?;
        let mut t = s.clone();
        for ((x, _), v) in items.iter().zip(values) {
            let v = self.admit(x, v, s)?;
            t.set(x.clone(), v);
        }
        Ok(t)
    }
}

/// Evaluates a probability expression, rejecting values outside `[0, 1]`.
pub fn probability(p: &Expr, s: &State) -> Result<BigRational, ExecError> {
    let v = p.eval(s)?;
    if !is_probability(&v) {
        return Err(ExecError::BadProbability { value: v, state: Box::new(s.clone()) });
    }
    Ok(v.as_rational().unwrap_or_default())
}

/// Every output distribution of `c` from `s`, in syntactic order (left
/// branches first), without duplicates.
pub fn resolutions<S: Scalar>(
    c: &Command,
    s: &State,
    env: &Env,
) -> Result<Vec<Distribution<State, S>>, ExecError> {
    match c {
        Command::Skip => Ok(vec![Distribution::point(s.clone())]),
        Command::Assign(x, e) => {
            Ok(vec![Distribution::point(env.assign(&[(x.clone(), e.clone())], s)?)])
        }
        Command::MultiAssign(items) => Ok(vec![Distribution::point(env.assign(items, s)?)]),
        Command::Seq(a, b) => {
            let mut out = Vec::new();
            for d in resolutions::<S>(a, s, env)? {
                let mut combos: Vec<Vec<(State, S)>> = vec![Vec::new()];
                for (mid, p) in d.iter() {
                    let nexts = resolutions::<S>(b, mid, env)?;
                    let mut grown = Vec::with_capacity(combos.len() * nexts.len());
                    for partial in &combos {
                        for n in &nexts {
                            let mut acc = partial.clone();
                            acc.extend(n.iter().map(|(t, q)| (t.clone(), p.clone() * q.clone())));
                            grown.push(acc);
                        }
                    }
                    if grown.len() > MAX_RESOLUTIONS {
                        return Err(ExecError::TooManyResolutions(s.clone()));
                    }
                    combos = grown;
                }
                for combo in combos {
                    push_unique(&mut out, Distribution::from_weights_unchecked(combo));
                }
            }
            Ok(out)
        }
        Command::Cond(g, a, b) => {
            if g.eval_bool(s)? {
                resolutions(a, s, env)
            } else {
                resolutions(b, s, env)
            }
        }
        Command::PChoice(p, a, b) => {
            let r = probability(p, s)?;
            if r == num_traits::Zero::zero() {
                return resolutions(b, s, env);
            }
            if r == num_traits::One::one() {
                return resolutions(a, s, env);
            }
            let p = S::from_rational(&r);
            let q = S::one() - p.clone();
            let (ra, rb) = (resolutions::<S>(a, s, env)?, resolutions::<S>(b, s, env)?);
            if ra.len() * rb.len() > MAX_RESOLUTIONS {
                return Err(ExecError::TooManyResolutions(s.clone()));
            }
            let mut out = Vec::new();
            for da in &ra {
                for db in &rb {
                    let mixed = da
                        .iter()
                        .map(|(t, w)| (t.clone(), p.clone() * w.clone()))
                        .chain(db.iter().map(|(t, w)| (t.clone(), q.clone() * w.clone())));
                    push_unique(&mut out, Distribution::from_weights_unchecked(mixed));
                }
            }
            Ok(out)
        }
        Command::PChoiceAtMost(p, a, b) => {
            let expanded = Command::nd(
                Command::PChoice(p.clone(), a.clone(), b.clone()),
                (**b).clone(),
            );
            resolutions(&expanded, s, env)
        }
        Command::NDChoice(a, b) => {
            let mut out = resolutions(a, s, env)?;
            for d in resolutions(b, s, env)? {
                push_unique(&mut out, d);
            }
            if out.len() > MAX_RESOLUTIONS {
                return Err(ExecError::TooManyResolutions(s.clone()));
            }
            Ok(out)
        }
        Command::WeakIter(_) => Err(ExecError::Loop("weak iteration")),
        Command::While(..) => Err(ExecError::Loop("while loop")),
    }
}

fn push_unique<S: Scalar>(out: &mut Vec<Distribution<State, S>>, d: Distribution<State, S>) {
    if !out.contains(&d) {
        out.push(d);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lang::parse_command;
    use crate::scalar::ratio;

    fn st(pairs: &[(&str, i64)]) -> State {
        State::from_pairs(pairs.iter().copied())
    }

    #[test]
    fn nested_choices_split_per_branch() {
        let c = parse_command("(x := 1 [] x := 2) pchoice 1/2 or x := 3").unwrap();
        let r = resolutions::<BigRational>(&c, &st(&[("x", 0)]), &Env::unconstrained()).unwrap();
        assert_eq!(r.len(), 2);
        assert_eq!(r[0].prob(&st(&[("x", 1)])), ratio(1, 2));
        assert_eq!(r[1].prob(&st(&[("x", 2)])), ratio(1, 2));
    }

    #[test]
    fn at_most_choice() {
        let c = parse_command("ans := false pchoice<= 3/4 or skip").unwrap();
        let s = State::from_pairs([("ans", true)]);
        let r = resolutions::<BigRational>(&c, &s, &Env::unconstrained()).unwrap();
        assert_eq!(r.len(), 2);
        assert_eq!(r[0].prob(&s), ratio(1, 4));
        assert_eq!(r[1].prob(&s), ratio(1, 1));
    }

    #[test]
    fn loops_are_rejected() {
        let c = parse_command("it x := 0 ti").unwrap();
        let r = resolutions::<f64>(&c, &st(&[("x", 1)]), &Env::unconstrained());
        assert!(matches!(r, Err(ExecError::Loop(_))));
    }
}
