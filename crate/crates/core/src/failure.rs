//! Failure-mode analysis over a monitored product MDP.
//!
//! The product latches, for the failure predicate `F` and for each watched
//! predicate `φ`, whether it has held so far. `F`-states are absorbing.

use std::collections::{HashMap, VecDeque};

use crate::expr::Expr;
use crate::mdp::{extremal_from, policy_values, unfold_failure_tree, Action, ExplicitMdp, MdpError, Mode, Scheduler, Trace, SKIP};
use crate::safety::{check_safety_bounded, BoundedVerdict, SafetyError, SafetySpec};
use crate::scalar::Scalar;
use crate::value::{Name, State, Value};

/// Prefix of latched flag variables; never a valid identifier in source.
pub const FLAG_PREFIX: &str = "@";
/// Name of the latched failure flag.
pub const FAIL_FLAG: &str = "@F";

/// Which base states count as failed.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FailureSet {
    pub member: Vec<bool>,
}

impl FailureSet {
    /// States satisfying the predicate.
    pub fn exact<S: Scalar>(mdp: &ExplicitMdp<S>, pred: &Expr) -> Result<Self, MdpError> {
        Ok(FailureSet { member: mdp.satisfying(pred)? })
    }

    /// States from which every scheduler reaches the predicate with
    /// probability 1. Complement of the states that can reach, avoiding the
    /// predicate, a region where some scheduler surely avoids it forever.
    pub fn certain<S: Scalar>(mdp: &ExplicitMdp<S>, pred: &Expr) -> Result<Self, MdpError> {
        let bad = mdp.satisfying(pred)?;
        let n = mdp.num_states();
        let mut safe: Vec<bool> = bad.iter().map(|b| !b).collect();
        loop {
            let mut changed = false;
            for s in 0..n {
                if safe[s] && !mdp.actions[s].iter().any(|a| a.dist.iter().all(|(t, _)| safe[*t])) {
                    safe[s] = false;
                    changed = true;
                }
            }
            if !changed {
                break;
            }
        }
        let mut preds: Vec<Vec<usize>> = vec![Vec::new(); n];
        for (s, acts) in mdp.actions.iter().enumerate() {
            for a in acts {
                for (t, _) in &a.dist {
                    preds[*t].push(s);
                }
            }
        }
        let mut escapes = safe.clone();
        let mut queue: VecDeque<usize> = (0..n).filter(|&s| safe[s]).collect();
        while let Some(t) = queue.pop_front() {
            for &s in &preds[t] {
                if !escapes[s] && !bad[s] {
                    escapes[s] = true;
                    queue.push_back(s);
                }
            }
        }
        Ok(FailureSet { member: escapes.iter().map(|e| !e).collect() })
    }

    pub fn count(&self) -> usize {
        self.member.iter().filter(|b| **b).count()
    }
}

/// Product of a base MDP with latched flags.
#[derive(Clone, Debug)]
pub struct MonitoredMdp<S> {
    /// Product MDP. Its `vars` are the base variables, so tuples render
    /// without the flags.
    pub mdp: ExplicitMdp<S>,
    /// Base state of each product state.
    pub base: Vec<usize>,
    /// Watched predicate names, in flag order.
    pub watched: Vec<Name>,
}

pub fn flag_name(pred: &str) -> Name {
    Name::from(format!("{FLAG_PREFIX}{pred}"))
}

impl<S: Scalar> MonitoredMdp<S> {
    /// `◇φ` as a predicate over product states.
    pub fn seen(&self, pred: &str) -> Expr {
        Expr::Var(flag_name(pred))
    }

    /// `◇F` as a predicate over product states.
    pub fn seen_failure(&self) -> Expr {
        Expr::var(FAIL_FLAG)
    }

    /// Whether the latched flag of `pred` is set in product state `i`.
    pub fn flag(&self, i: usize, pred: &str) -> bool {
        self.mdp.states[i].get(&flag_name(pred)) == Some(&Value::Bool(true))
    }
}

/// Builds the reachable product of `mdp` with flags for `fail` and each
/// watched predicate. Failed states only stutter.
pub fn monitor<S: Scalar>(
    mdp: &ExplicitMdp<S>,
    fail: &FailureSet,
    watched: &[(Name, Expr)],
) -> Result<MonitoredMdp<S>, MdpError> {
    let holds: Vec<Vec<bool>> =
        watched.iter().map(|(_, p)| mdp.satisfying(p)).collect::<Result<_, _>>()?;
    let names: Vec<Name> = watched.iter().map(|(n, _)| flag_name(n)).collect();
    let fail_name = Name::from(FAIL_FLAG);
    let product_state = |base: usize, flags: &[bool], failed: bool| -> State {
        let mut s = mdp.states[base].clone();
        s.set(fail_name.clone(), Value::Bool(failed));
        for (n, f) in names.iter().zip(flags) {
            s.set(n.clone(), Value::Bool(*f));
        }
        s
    };
    type Key = (usize, Vec<bool>, bool);
    let mut index: HashMap<Key, usize> = HashMap::new();
    let mut keys: Vec<Key> = Vec::new();
    let mut queue = VecDeque::new();
    let mut intern = |k: Key, keys: &mut Vec<Key>, queue: &mut VecDeque<usize>| -> usize {
        *index.entry(k.clone()).or_insert_with(|| {
            keys.push(k);
            queue.push_back(keys.len() - 1);
            keys.len() - 1
        })
    };
    let enter = |t: usize, prev: Option<(&[bool], bool)>| -> Key {
        let flags: Vec<bool> = (0..names.len())
            .map(|i| prev.is_some_and(|(f, _)| f[i]) || holds[i][t])
            .collect();
        let failed = prev.is_some_and(|(_, f)| f) || fail.member[t];
        (t, flags, failed)
    };
    let mut initial = Vec::new();
    for (i, p) in &mdp.initial {
        initial.push((intern(enter(*i, None), &mut keys, &mut queue), p.clone()));
    }
    let mut actions: Vec<Vec<Action<S>>> = Vec::new();
    while let Some(i) = queue.pop_front() {
        let (b, flags, failed) = keys[i].clone();
        let acts = if fail.member[b] {
            vec![Action { label: Name::from(SKIP), op: None, dist: vec![(i, S::one())] }]
        } else {
            mdp.actions[b]
                .iter()
                .map(|a| {
                    let mut dist: Vec<(usize, S)> = a
                        .dist
                        .iter()
                        .map(|(t, p)| (intern(enter(*t, Some((&flags, failed))), &mut keys, &mut queue), p.clone()))
                        .collect();
                    dist.sort_by_key(|(t, _)| *t);
                    Action { label: a.label.clone(), op: a.op, dist }
                })
                .collect()
        };
        actions.push(acts);
    }
    let states: Vec<State> = keys.iter().map(|(b, f, x)| product_state(*b, f, *x)).collect();
    let base = keys.iter().map(|(b, _, _)| *b).collect();
    initial.sort_by_key(|(i, _)| *i);
    let product = ExplicitMdp::from_parts(mdp.vars.clone(), states, initial, actions)?;
    Ok(MonitoredMdp { mdp: product, base, watched: watched.iter().map(|(n, _)| n.clone()).collect() })
}

/// `P(X | C)`; undefined when `P(C) = 0`, which counts as maximal.
#[derive(Clone, Debug, PartialEq)]
pub enum Conditional<S> {
    Defined(S),
    UndefinedMaximal,
}

impl<S: Scalar> Conditional<S> {
    fn quotient(num: S, den: S) -> Self {
        if den.is_zero() {
            Conditional::UndefinedMaximal
        } else {
            Conditional::Defined(num / den)
        }
    }

    /// Ordering where the undefined value is above every number.
    pub fn at_least(&self, lambda: &S) -> bool {
        match self {
            Conditional::Defined(v) => v >= lambda || v.approx_eq(lambda),
            Conditional::UndefinedMaximal => true,
        }
    }
}

fn indicator<S: Scalar>(mm: &MonitoredMdp<S>, p: &Expr) -> Result<Vec<S>, MdpError> {
    Ok(mm.mdp.satisfying(p)?.into_iter().map(|b| if b { S::one() } else { S::zero() }).collect())
}

/// Quotient of the extremal values of `lift(C ∧ X)` and `lift(C)` at horizon `k`.
pub fn conditional_probability<S: Scalar>(
    mm: &MonitoredMdp<S>,
    x: &Expr,
    c: &Expr,
    k: usize,
    mode: Mode,
) -> Result<Conditional<S>, MdpError> {
    let num = extremal_from(&mm.mdp, indicator(mm, &Expr::and(c.clone(), x.clone()))?, k, mode).value;
    let den = extremal_from(&mm.mdp, indicator(mm, c)?, k, mode).value;
    Ok(Conditional::quotient(num, den))
}

/// `P(X | C)` under one scheduler.
pub fn scheduler_conditional<S: Scalar>(
    mm: &MonitoredMdp<S>,
    sched: &Scheduler,
    x: &Expr,
    c: &Expr,
    k: usize,
) -> Result<Conditional<S>, MdpError> {
    let num = policy_values(&mm.mdp, sched, indicator(mm, &Expr::and(c.clone(), x.clone()))?, k);
    let den = policy_values(&mm.mdp, sched, indicator(mm, c)?, k);
    Ok(Conditional::quotient(mm.mdp.initial_value(&num), mm.mdp.initial_value(&den)))
}

fn discriminant_terminal<S: Scalar>(mm: &MonitoredMdp<S>, x: &Expr, c: &Expr, lambda: &S) -> Result<Vec<S>, MdpError> {
    let both = indicator(mm, &Expr::and(c.clone(), x.clone()))?;
    let cond = indicator(mm, c)?;
    Ok(both.into_iter().zip(cond).map(|(b, c)| b - lambda.clone() * c).collect())
}

/// `E[lift(C ∧ X) - λ·lift(C)]` under one scheduler. Non-negative exactly
/// when that scheduler's `P(X | C) ≥ λ` (or `P(C) = 0`).
pub fn scheduler_discriminant<S: Scalar>(
    mm: &MonitoredMdp<S>,
    sched: &Scheduler,
    x: &Expr,
    c: &Expr,
    lambda: &S,
    k: usize,
) -> Result<S, MdpError> {
    let v = policy_values(&mm.mdp, sched, discriminant_terminal(mm, x, c, lambda)?, k);
    Ok(mm.mdp.initial_value(&v))
}

/// Minimum of the discriminant over all schedulers.
pub fn min_discriminant<S: Scalar>(
    mm: &MonitoredMdp<S>,
    x: &Expr,
    c: &Expr,
    lambda: &S,
    k: usize,
) -> Result<S, MdpError> {
    Ok(extremal_from(&mm.mdp, discriminant_terminal(mm, x, c, lambda)?, k, Mode::Min).value)
}

/// `φ` is a failure mode at horizon `k` when every scheduler that reaches
/// `φ` with positive probability also reaches `F` whenever it reaches `φ`,
/// and some scheduler reaches `φ`.
pub fn is_failure_mode<S: Scalar>(mm: &MonitoredMdp<S>, phi: &str, k: usize) -> Result<bool, MdpError> {
    let seen = mm.seen(phi);
    let reach = extremal_from(&mm.mdp, indicator(mm, &seen)?, k, Mode::Max).value;
    if reach.is_zero() {
        return Ok(false);
    }
    let d = min_discriminant(mm, &mm.seen_failure(), &seen, &S::one(), k)?;
    Ok(d >= S::zero() || d.approx_eq(&S::zero()))
}

/// Conjunction of the named atoms.
fn conjunction(atoms: &[(Name, Expr)], pick: &[usize]) -> (Name, Expr) {
    let name = pick.iter().map(|&i| &*atoms[i].0).collect::<Vec<_>>().join(",");
    let pred = Expr::all(pick.iter().map(|&i| atoms[i].1.clone()));
    (Name::from(name), pred)
}

/// Tests whether the conjunction of the picked atoms is a failure mode.
pub fn conjunction_is_mode<S: Scalar>(
    mdp: &ExplicitMdp<S>,
    fail: &FailureSet,
    atoms: &[(Name, Expr)],
    pick: &[usize],
    k: usize,
) -> Result<bool, MdpError> {
    let (name, pred) = conjunction(atoms, pick);
    let mm = monitor(mdp, fail, &[(name.clone(), pred)])?;
    is_failure_mode(&mm, &name, k)
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CriticalSet {
    /// Atom indices, ascending.
    pub atoms: Vec<usize>,
    pub names: Vec<Name>,
}

/// Inclusion-minimal conjunctions of atoms that are failure modes, found
/// by increasing size up to `max_size`.
pub fn critical_sets<S: Scalar>(
    mdp: &ExplicitMdp<S>,
    fail: &FailureSet,
    atoms: &[(Name, Expr)],
    k: usize,
    max_size: usize,
) -> Result<Vec<CriticalSet>, MdpError> {
    critical_subsets(mdp, fail, atoms, &(0..atoms.len()).collect::<Vec<_>>(), k, max_size)
}

fn critical_subsets<S: Scalar>(
    mdp: &ExplicitMdp<S>,
    fail: &FailureSet,
    atoms: &[(Name, Expr)],
    within: &[usize],
    k: usize,
    max_size: usize,
) -> Result<Vec<CriticalSet>, MdpError> {
    let mut found: Vec<Vec<usize>> = Vec::new();
    for size in 1..=max_size.min(within.len()) {
        for pick in combinations(within, size) {
            if found.iter().any(|f| f.iter().all(|a| pick.contains(a))) {
                continue;
            }
            if conjunction_is_mode(mdp, fail, atoms, &pick, k)? {
                found.push(pick);
            }
        }
    }
    Ok(found
        .into_iter()
        .map(|atoms_idx| CriticalSet {
            names: atoms_idx.iter().map(|&i| atoms[i].0.clone()).collect(),
            atoms: atoms_idx,
        })
        .collect())
}

fn combinations(items: &[usize], size: usize) -> Vec<Vec<usize>> {
    if size == 0 {
        return vec![Vec::new()];
    }
    let mut out = Vec::new();
    for (i, &first) in items.iter().enumerate() {
        for mut rest in combinations(&items[i + 1..], size - 1) {
            rest.insert(0, first);
            out.push(rest);
        }
    }
    out
}

#[derive(Clone, Debug, PartialEq)]
pub struct TtfEntry<S> {
    pub k: usize,
    /// `max P(◇F ∧ ◇φ)` within `k` steps.
    pub joint: S,
    /// `P(◇F | ◇φ)` under the scheduler attaining `joint`.
    pub conditional: Conditional<S>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TtfProfile<S> {
    pub mode: Vec<Name>,
    pub entries: Vec<TtfEntry<S>>,
    /// Least `k` with `joint > 0`.
    pub first_failure_step: Option<usize>,
    /// `joint` at the largest horizon.
    pub max_failure_probability: S,
}

/// Time-to-failure profile of a conjunction of atoms for `k = 0..=kmax`.
pub fn time_to_failure<S: Scalar>(
    mdp: &ExplicitMdp<S>,
    fail: &FailureSet,
    atoms: &[(Name, Expr)],
    pick: &[usize],
    kmax: usize,
) -> Result<TtfProfile<S>, MdpError> {
    let (name, pred) = conjunction(atoms, pick);
    let mm = monitor(mdp, fail, &[(name.clone(), pred)])?;
    let seen = mm.seen(&name);
    let joint_term = indicator(&mm, &Expr::and(seen.clone(), mm.seen_failure()))?;
    let seen_term = indicator(&mm, &seen)?;
    let mut entries = Vec::new();
    for k in 0..=kmax {
        let ext = extremal_from(&mm.mdp, joint_term.clone(), k, Mode::Max);
        let den = mm.mdp.initial_value(&policy_values(&mm.mdp, &ext.scheduler, seen_term.clone(), k));
        entries.push(TtfEntry { k, joint: ext.value.clone(), conditional: Conditional::quotient(ext.value, den) });
    }
    let first_failure_step = entries.iter().find(|e| e.joint > S::zero()).map(|e| e.k);
    let max_failure_probability = entries.last().map(|e| e.joint.clone()).unwrap_or_else(S::zero);
    Ok(TtfProfile {
        mode: pick.iter().map(|&i| atoms[i].0.clone()).collect(),
        entries,
        first_failure_step,
        max_failure_probability,
    })
}

#[derive(Clone, Debug)]
pub struct Candidate {
    pub atoms: Vec<usize>,
    pub is_mode: bool,
}

#[derive(Clone, Debug)]
pub struct WorkflowReport<S> {
    /// Horizon of the failure tree, if the safety check failed.
    pub failure_k: Option<usize>,
    /// Maximal failure probability at `failure_k`.
    pub failure_probability: Option<S>,
    /// Failure-tree traces ending in a failed state.
    pub traces: Vec<Trace<S>>,
    /// Atom sets holding at trace endpoints, with their verdicts.
    pub candidates: Vec<Candidate>,
    /// Inclusion-minimal failure modes.
    pub modes: Vec<CriticalSet>,
    pub profiles: Vec<TtfProfile<S>>,
    pub horizon: usize,
}

#[derive(Clone, Debug)]
pub struct WorkflowConfig<'a> {
    pub spec: &'a SafetySpec,
    /// Predicate selecting failed endpoints in step (a).
    pub failure: &'a Expr,
    /// Failure set used by the monitor.
    pub fail_set: &'a FailureSet,
    pub atoms: &'a [(Name, Expr)],
    pub kmax: usize,
    pub max_size: usize,
}

/// (a) find the failure tree and its failed traces; (b) collect the atoms
/// true at their endpoints; (c) verify each candidate and shrink it to its
/// minimal sub-modes, adding every other minimal mode up to `max_size`;
/// (d) profile time to failure for each mode.
pub fn failure_mode_workflow<S: Scalar>(
    mdp: &ExplicitMdp<S>,
    cfg: &WorkflowConfig<'_>,
) -> Result<WorkflowReport<S>, SafetyError> {
    let bmc = check_safety_bounded(mdp, cfg.spec, cfg.kmax)?;
    let bad = mdp.satisfying(cfg.failure)?;
    let mut traces = Vec::new();
    let (mut failure_k, mut failure_probability) = (None, None);
    if let BoundedVerdict::FailureTreeFound { k, scheduler, .. } = &bmc.verdict {
        let tree = unfold_failure_tree(mdp, scheduler, *k, None)?;
        traces = tree.leaf_traces().into_iter().filter(|t| bad[t.last()]).collect();
        failure_k = Some(*k);
        failure_probability = Some(traces.iter().fold(S::zero(), |a, t| a + t.prob.clone()));
    }
    let holds: Vec<Vec<bool>> =
        cfg.atoms.iter().map(|(_, p)| mdp.satisfying(p)).collect::<Result<_, _>>()?;
    let mut candidates: Vec<Candidate> = Vec::new();
    let mut modes: Vec<Vec<usize>> = Vec::new();
    for t in &traces {
        let end = t.last();
        let set: Vec<usize> = (0..cfg.atoms.len()).filter(|&i| holds[i][end]).collect();
        if set.is_empty() || candidates.iter().any(|c| c.atoms == set) {
            continue;
        }
        let is_mode = conjunction_is_mode(mdp, cfg.fail_set, cfg.atoms, &set, cfg.kmax)?;
        if is_mode {
            for m in critical_subsets(mdp, cfg.fail_set, cfg.atoms, &set, cfg.kmax, set.len())? {
                if !modes.contains(&m.atoms) {
                    modes.push(m.atoms);
                }
            }
        }
        candidates.push(Candidate { atoms: set, is_mode });
    }
    for m in critical_sets(mdp, cfg.fail_set, cfg.atoms, cfg.kmax, cfg.max_size)? {
        if !modes.contains(&m.atoms) {
            modes.push(m.atoms);
        }
    }
    modes.sort_by(|a, b| a.len().cmp(&b.len()).then_with(|| a.cmp(b)));
    let profiles = modes
        .iter()
        .map(|m| time_to_failure(mdp, cfg.fail_set, cfg.atoms, m, cfg.kmax))
        .collect::<Result<Vec<_>, _>>()?;
    let modes = modes
        .into_iter()
        .map(|a| CriticalSet { names: a.iter().map(|&i| cfg.atoms[i].0.clone()).collect(), atoms: a })
        .collect();
    Ok(WorkflowReport {
        failure_k,
        failure_probability,
        traces,
        candidates,
        modes,
        profiles,
        horizon: cfg.kmax,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mdp::{build_mdp, BuildOptions};
    use crate::models::{controller_atoms, controller_failure, controller_model, ControllerParams};
    use crate::scalar::ratio;
    use num_rational::BigRational;

    #[test]
    fn dead_sensors_fail_at_step_two() {
        let m = controller_model(&ControllerParams::default()).unwrap();
        let mdp: ExplicitMdp<BigRational> = build_mdp(&m, BuildOptions::default()).unwrap();
        let fail = FailureSet::certain(&mdp, &controller_failure(&m)).unwrap();
        let atoms = controller_atoms(&m);
        let p = time_to_failure(&mdp, &fail, &atoms, &[0, 1], 6).unwrap();
        assert_eq!(p.first_failure_step, Some(2));
        assert_eq!(p.max_failure_probability, ratio(1, 400));
    }
}
