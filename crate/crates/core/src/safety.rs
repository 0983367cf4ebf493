//! Quantitative safety: bounded model checking, inductivity witnesses and
//! exhaustive inductivity verification.

use std::collections::BTreeMap;

use thiserror::Error;

use crate::expr::{EvalError, Expr};
use crate::lang::Machine;
use crate::mdp::{extremal_value, unfold_failure_tree, ExplicitMdp, MdpError, Mode, Scheduler, Trace, INIT};
use crate::scalar::Scalar;
use crate::value::Name;

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum SafetyError {
    #[error("machine `{0}` has no expectations clause")]
    MissingExpectations(Name),
    #[error(transparent)]
    Mdp(#[from] MdpError),
    #[error(transparent)]
    Eval(#[from] EvalError),
}

/// `threshold => expt`: the expected value of `expt` must stay at least
/// `threshold`, which is evaluated under the initial distribution.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SafetySpec {
    pub threshold: Expr,
    pub expt: Expr,
}

impl SafetySpec {
    pub fn of_machine(m: &Machine) -> Result<Self, SafetyError> {
        let (threshold, expt) = m
            .expectations
            .clone()
            .ok_or_else(|| SafetyError::MissingExpectations(m.name.clone()))?;
        Ok(SafetySpec { threshold, expt })
    }

    pub fn threshold_value<S: Scalar>(&self, mdp: &ExplicitMdp<S>) -> Result<S, EvalError> {
        Ok(mdp.initial_value(&mdp.eval_all(&self.threshold)?))
    }
}

#[derive(Clone, Debug)]
pub enum BoundedVerdict<S> {
    /// The minimal expected value met the threshold for every `K ≤ kmax`.
    SafeUpTo(usize),
    /// First horizon whose minimal value drops below the threshold.
    FailureTreeFound { k: usize, value: S, threshold: S, scheduler: Scheduler },
}

#[derive(Clone, Debug)]
pub struct BoundedReport<S> {
    pub threshold: S,
    /// Minimal expected value at each horizon examined.
    pub values: Vec<(usize, S)>,
    pub verdict: BoundedVerdict<S>,
}

/// Computes `min_sched E[expt after K steps]` for `K = 0..=kmax`, stopping at
/// the first `K` below the threshold.
pub fn check_safety_bounded<S: Scalar>(
    mdp: &ExplicitMdp<S>,
    spec: &SafetySpec,
    kmax: usize,
) -> Result<BoundedReport<S>, SafetyError> {
    let threshold = spec.threshold_value(mdp)?;
    let mut values = Vec::new();
    for k in 0..=kmax {
        let ext = extremal_value(mdp, &spec.expt, k, Mode::Min)?;
        values.push((k, ext.value.clone()));
        if ext.value < threshold && !ext.value.approx_eq(&threshold) {
            return Ok(BoundedReport {
                threshold: threshold.clone(),
                values,
                verdict: BoundedVerdict::FailureTreeFound {
                    k,
                    value: ext.value,
                    threshold,
                    scheduler: ext.scheduler,
                },
            });
        }
    }
    Ok(BoundedReport { threshold, values, verdict: BoundedVerdict::SafeUpTo(kmax) })
}

/// A reachable state whose one-step minimal expectation is below its own
/// expectation.
#[derive(Clone, Debug, PartialEq)]
pub struct Counterexample<S> {
    pub state: usize,
    /// `min_a Σ δ_a(t) · expt(t)`.
    pub wp: S,
    /// `expt(state)`.
    pub expt: S,
    /// Label of the action attaining the minimum.
    pub action: Name,
    /// Shortest, then most probable, trace reaching the state.
    pub trace: Trace<S>,
}

/// One-step minimum of `expt` over each state's actions, with the
/// minimising action index (lowest on ties).
pub fn one_step_minima<S: Scalar>(mdp: &ExplicitMdp<S>, values: &[S]) -> Vec<(S, usize)> {
    mdp.actions
        .iter()
        .map(|acts| {
            let mut best: Option<(S, usize)> = None;
            for (a, act) in acts.iter().enumerate() {
                let v = act.dist.iter().fold(S::zero(), |acc, (t, p)| acc + p.clone() * values[*t].clone());
                if best.as_ref().is_none_or(|(b, _)| v < *b) {
                    best = Some((v, a));
                }
            }
            best.expect("every state has an action")
        })
        .collect()
}

fn decreases<S: Scalar>(wp: &S, e: &S) -> bool {
    wp < e && !wp.approx_eq(e)
}

/// Witnesses of non-inductivity among the states of the scheduler's
/// failure tree of depth `k`, one per state. Order: shortest trace, then
/// highest probability, then canonical state order.
pub fn find_inductivity_counterexamples<S: Scalar>(
    mdp: &ExplicitMdp<S>,
    expt: &Expr,
    sched: &Scheduler,
    k: usize,
) -> Result<Vec<Counterexample<S>>, SafetyError> {
    let values = mdp.eval_all(expt)?;
    let minima = one_step_minima(mdp, &values);
    let tree = unfold_failure_tree(mdp, sched, k, None)?;
    let mut best: BTreeMap<usize, usize> = BTreeMap::new();
    for (i, node) in tree.nodes.iter().enumerate() {
        let s = node.state;
        if !decreases(&minima[s].0, &values[s]) {
            continue;
        }
        let replace = match best.get(&s) {
            None => true,
            Some(&j) => {
                let old = &tree.nodes[j];
                node.depth < old.depth || (node.depth == old.depth && node.prob > old.prob)
            }
        };
        if replace {
            best.insert(s, i);
        }
    }
    let mut out: Vec<Counterexample<S>> = best
        .into_iter()
        .map(|(s, node)| Counterexample {
            state: s,
            wp: minima[s].0.clone(),
            expt: values[s].clone(),
            action: mdp.actions[s][minima[s].1].label.clone(),
            trace: tree.trace_to(node),
        })
        .collect();
    sort_counterexamples(mdp, &mut out);
    Ok(out)
}

fn sort_counterexamples<S: Scalar>(mdp: &ExplicitMdp<S>, cex: &mut [Counterexample<S>]) {
    cex.sort_by(|a, b| {
        a.trace
            .steps
            .len()
            .cmp(&b.trace.steps.len())
            .then_with(|| b.trace.prob.partial_cmp(&a.trace.prob).unwrap_or(std::cmp::Ordering::Equal))
            .then_with(|| mdp.states[a.state].cmp(&mdp.states[b.state]))
    });
}

#[derive(Clone, Debug)]
pub struct InductiveReport<S> {
    /// Number of reachable states examined.
    pub visited: usize,
    /// `wp(s) - expt(s)` per state; negative entries are counterexamples.
    pub margins: Vec<S>,
    pub counterexamples: Vec<Counterexample<S>>,
}

impl<S: Scalar> InductiveReport<S> {
    pub fn inductive(&self) -> bool {
        self.counterexamples.is_empty()
    }

    pub fn min_margin(&self) -> Option<&S> {
        self.margins
            .iter()
            .fold(None, |acc: Option<&S>, m| match acc {
                Some(a) if a <= m => Some(a),
                _ => Some(m),
            })
    }
}

/// Checks the one-step inductivity of `expt` at every reachable state.
/// Witness traces are breadth-first shortest paths; among equally short
/// paths the most probable one is kept.
pub fn verify_inductive_exhaustive<S: Scalar>(
    mdp: &ExplicitMdp<S>,
    expt: &Expr,
) -> Result<InductiveReport<S>, SafetyError> {
    let values = mdp.eval_all(expt)?;
    let minima = one_step_minima(mdp, &values);
    let margins: Vec<S> = minima
        .iter()
        .zip(&values)
        .map(|((w, _), e)| w.clone() - e.clone())
        .collect();
    let paths = shortest_paths(mdp);
    let mut out: Vec<Counterexample<S>> = (0..mdp.num_states())
        .filter(|&s| decreases(&minima[s].0, &values[s]))
        .map(|s| Counterexample {
            state: s,
            wp: minima[s].0.clone(),
            expt: values[s].clone(),
            action: mdp.actions[s][minima[s].1].label.clone(),
            trace: paths.trace(s),
        })
        .collect();
    sort_counterexamples(mdp, &mut out);
    Ok(InductiveReport { visited: mdp.num_states(), margins, counterexamples: out })
}

/// Layered breadth-first search keeping, per state, the most probable of
/// its shortest incoming paths.
pub struct ShortestPaths<S> {
    parent: Vec<Option<(usize, Name)>>,
    prob: Vec<S>,
    depth: Vec<Option<usize>>,
}

pub fn shortest_paths<S: Scalar>(mdp: &ExplicitMdp<S>) -> ShortestPaths<S> {
    let n = mdp.num_states();
    let mut sp = ShortestPaths { parent: vec![None; n], prob: vec![S::zero(); n], depth: vec![None; n] };
    let mut layer: Vec<usize> = Vec::new();
    for (i, p) in &mdp.initial {
        sp.depth[*i] = Some(0);
        sp.prob[*i] = p.clone();
        layer.push(*i);
    }
    let mut d = 0;
    while !layer.is_empty() {
        let mut next: Vec<usize> = Vec::new();
        for &s in &layer {
            for act in &mdp.actions[s] {
                for (t, p) in &act.dist {
                    let cand = sp.prob[s].clone() * p.clone();
                    match sp.depth[*t] {
                        None => {
                            sp.depth[*t] = Some(d + 1);
                            sp.prob[*t] = cand;
                            sp.parent[*t] = Some((s, act.label.clone()));
                            next.push(*t);
                        }
                        Some(dt) if dt == d + 1 && cand > sp.prob[*t] => {
                            sp.prob[*t] = cand;
                            sp.parent[*t] = Some((s, act.label.clone()));
                        }
                        _ => {}
                    }
                }
            }
        }
        layer = next;
        d += 1;
    }
    sp
}

impl<S: Scalar> ShortestPaths<S> {
    pub fn depth(&self, s: usize) -> Option<usize> {
        self.depth[s]
    }

    pub fn trace(&self, s: usize) -> Trace<S> {
        let mut steps = Vec::new();
        let mut cur = s;
        loop {
            match &self.parent[cur] {
                Some((p, label)) => {
                    steps.push((label.clone(), cur));
                    cur = *p;
                }
                None => {
                    steps.push((Name::from(INIT), cur));
                    break;
                }
            }
        }
        steps.reverse();
        Trace { steps, prob: self.prob[s].clone() }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum SafetyConclusion<S> {
    /// Inductive and the threshold is met initially, so safe at every `K`.
    Verified { initial_bound: S },
    Inconclusive { reason: String },
}

/// Lifts an inductivity result to unbounded safety.
pub fn conclude_safety_from_inductivity<S: Scalar>(
    mdp: &ExplicitMdp<S>,
    spec: &SafetySpec,
    report: &InductiveReport<S>,
) -> Result<SafetyConclusion<S>, SafetyError> {
    let initial = mdp.initial_value(&mdp.eval_all(&spec.expt)?);
    if !report.inductive() {
        return Ok(SafetyConclusion::Inconclusive {
            reason: format!("expectation is not inductive at {} reachable states", report.counterexamples.len()),
        });
    }
    let threshold = spec.threshold_value(mdp)?;
    if threshold > initial && !threshold.approx_eq(&initial) {
        return Ok(SafetyConclusion::Inconclusive {
            reason: format!("threshold exceeds initial expectation ({threshold} > {initial})"),
        });
    }
    Ok(SafetyConclusion::Verified { initial_bound: initial })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mdp::{build_mdp, BuildOptions};
    use crate::models::{loop_model, mincut_model};
    use crate::scalar::ratio;
    use num_rational::BigRational;

    #[test]
    fn loop_is_inductive() {
        let m = loop_model();
        let mdp: ExplicitMdp<BigRational> = build_mdp(&m, BuildOptions::default()).unwrap();
        let spec = SafetySpec::of_machine(&m).unwrap();
        let rep = verify_inductive_exhaustive(&mdp, &spec.expt).unwrap();
        assert_eq!(rep.visited, 3);
        assert!(rep.inductive());
        assert_eq!(
            conclude_safety_from_inductivity(&mdp, &spec, &rep).unwrap(),
            SafetyConclusion::Verified { initial_bound: ratio(1, 2) }
        );
    }

    #[test]
    fn buggy_mincut_fails_at_first_step() {
        let m = mincut_model(3, true).unwrap();
        let mdp: ExplicitMdp<BigRational> = build_mdp(&m, BuildOptions::default()).unwrap();
        let spec = SafetySpec::of_machine(&m).unwrap();
        let rep = check_safety_bounded(&mdp, &spec, 4).unwrap();
        let BoundedVerdict::FailureTreeFound { k, value, scheduler, .. } = rep.verdict else {
            panic!("expected a failure");
        };
        assert_eq!((k, value), (1, ratio(1, 4)));
        let cex = find_inductivity_counterexamples(&mdp, &spec.expt, &scheduler, k).unwrap();
        assert_eq!(cex.len(), 1);
        assert_eq!(mdp.tuple(cex[0].state), "(3,true)");
        assert_eq!(cex[0].expt, ratio(1, 3));
    }
}
