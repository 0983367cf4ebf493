//! Explicit-state MDPs: construction from machines, bounded extremal
//! values by backward induction, and forward unfolding under a scheduler.

use std::collections::{HashMap, VecDeque};
use std::fmt;

use thiserror::Error;

use crate::distribution::Distribution;
use crate::expr::{EvalError, Expr};
use crate::lang::Machine;
use crate::scalar::Scalar;
use crate::semantics::{resolutions, Env, ExecError};
use crate::value::{Name, State};

/// Label of the stutter action added to deadlocked states.
pub const SKIP: &str = "Skip";
/// Label of the first element of every trace.
pub const INIT: &str = "INIT";

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum MdpError {
    #[error("operation `{op}`: {source}")]
    Step { op: Name, source: Box<ExecError> },
    #[error("initialisation: {0}")]
    Init(Box<ExecError>),
    #[error("initialisation is nondeterministic ({0} resolutions); only probabilistic initialisation is supported")]
    NondeterministicInit(usize),
    #[error("state space exceeds the cap of {0} states")]
    TooManyStates(usize),
    #[error("failure tree exceeds the cap of {0} nodes; raise the prune threshold")]
    TreeTooLarge(usize),
    #[error("invalid MDP: {0}")]
    Invalid(String),
    #[error(transparent)]
    Eval(Box<EvalError>),
}

impl From<EvalError> for MdpError {
    fn from(e: EvalError) -> Self {
        MdpError::Eval(Box::new(e))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Action<S> {
    pub label: Name,
    /// Index of the originating operation; `None` for the stutter action.
    pub op: Option<usize>,
    /// Successor indices with positive probabilities, sorted by index.
    pub dist: Vec<(usize, S)>,
}

#[derive(Clone, Debug)]
pub struct ExplicitMdp<S> {
    /// Variable order for rendering tuples.
    pub vars: Vec<Name>,
    pub states: Vec<State>,
    index: HashMap<State, usize>,
    /// Initial distribution over state indices, sorted by index.
    pub initial: Vec<(usize, S)>,
    /// Enabled actions per state; never empty.
    pub actions: Vec<Vec<Action<S>>>,
}

#[derive(Clone, Copy, Debug)]
pub struct BuildOptions {
    pub max_states: usize,
}

impl Default for BuildOptions {
    fn default() -> Self {
        BuildOptions { max_states: 10_000_000 }
    }
}

impl<S: Scalar> ExplicitMdp<S> {
    /// Assembles an MDP from raw parts, checking that every action and the
    /// initial distribution are proper distributions over known states.
    pub fn from_parts(
        vars: Vec<Name>,
        states: Vec<State>,
        initial: Vec<(usize, S)>,
        actions: Vec<Vec<Action<S>>>,
    ) -> Result<Self, MdpError> {
        let n = states.len();
        if actions.len() != n {
            return Err(MdpError::Invalid(format!("{} action lists for {n} states", actions.len())));
        }
        let check = |what: String, d: &[(usize, S)]| -> Result<(), MdpError> {
            if let Some((t, _)) = d.iter().find(|(t, _)| *t >= n) {
                return Err(MdpError::Invalid(format!("{what}: successor {t} out of range")));
            }
            Distribution::new(d.iter().cloned())
                .map(|_| ())
                .map_err(|e| MdpError::Invalid(format!("{what}: {e}")))
        };
        check("initial distribution".into(), &initial)?;
        for (s, acts) in actions.iter().enumerate() {
            if acts.is_empty() {
                return Err(MdpError::Invalid(format!("state {s} has no actions")));
            }
            for (a, act) in acts.iter().enumerate() {
                check(format!("state {s} action {a}"), &act.dist)?;
            }
        }
        let index = states.iter().cloned().enumerate().map(|(i, s)| (s, i)).collect::<HashMap<_, _>>();
        if index.len() != n {
            return Err(MdpError::Invalid("duplicate states".into()));
        }
        Ok(ExplicitMdp { vars, states, index, initial, actions })
    }

    pub fn num_states(&self) -> usize {
        self.states.len()
    }

    pub fn num_choices(&self) -> usize {
        self.actions.iter().map(Vec::len).sum()
    }

    pub fn num_transitions(&self) -> usize {
        self.actions.iter().flatten().map(|a| a.dist.len()).sum()
    }

    pub fn index_of(&self, s: &State) -> Option<usize> {
        self.index.get(s).copied()
    }

    pub fn tuple(&self, i: usize) -> String {
        self.states[i].tuple(&self.vars)
    }

    /// Evaluates `e` at every state.
    pub fn eval_all(&self, e: &Expr) -> Result<Vec<S>, EvalError> {
        self.states.iter().map(|s| e.eval_scalar::<S>(s)).collect()
    }

    /// Indices satisfying a predicate.
    pub fn satisfying(&self, p: &Expr) -> Result<Vec<bool>, EvalError> {
        self.states.iter().map(|s| p.eval_bool(s)).collect()
    }

    /// Expected value of per-state values under the initial distribution.
    pub fn initial_value(&self, v: &[S]) -> S {
        self.initial
            .iter()
            .fold(S::zero(), |acc, (i, p)| acc + p.clone() * v[*i].clone())
    }

    /// Converts probabilities to another scalar type.
    pub fn convert<T: Scalar>(&self, f: impl Fn(&S) -> T) -> ExplicitMdp<T> {
        let conv = |d: &[(usize, S)]| d.iter().map(|(t, p)| (*t, f(p))).collect::<Vec<_>>();
        ExplicitMdp {
            vars: self.vars.clone(),
            states: self.states.clone(),
            index: self.index.clone(),
            initial: conv(&self.initial),
            actions: self
                .actions
                .iter()
                .map(|acts| {
                    acts.iter()
                        .map(|a| Action { label: a.label.clone(), op: a.op, dist: conv(&a.dist) })
                        .collect()
                })
                .collect(),
        }
    }
}

/// Breadth-first construction of the reachable state space. Each enabled
/// operation contributes one action per resolution of its internal demonic
/// choices; states with no enabled operation get a `Skip` self-loop.
pub fn build_mdp<S: Scalar>(m: &Machine, opts: BuildOptions) -> Result<ExplicitMdp<S>, MdpError> {
    let env = Env::of_machine(m);
    let default = m
        .vars
        .iter()
        .fold(State::new(), |s, v| s.with(&v.name, v.domain.values()[0].clone()));
    let inits = resolutions::<S>(&m.init, &default, &env).map_err(|e| MdpError::Init(Box::new(e)))?;
    if inits.len() != 1 {
        return Err(MdpError::NondeterministicInit(inits.len()));
    }
    let steps: Vec<(Name, Expr, crate::lang::Command)> = m
        .ops
        .iter()
        .map(|o| {
            let (g, b) = o.step_form();
            (o.name.clone(), g, b)
        })
        .collect();

    let mut states: Vec<State> = Vec::new();
    let mut index: HashMap<State, usize> = HashMap::new();
    let mut queue = VecDeque::new();
    let mut intern = |s: &State, states: &mut Vec<State>, queue: &mut VecDeque<usize>| -> Result<usize, MdpError> {
        if let Some(&i) = index.get(s) {
            return Ok(i);
        }
        if states.len() >= opts.max_states {
            return Err(MdpError::TooManyStates(opts.max_states));
        }
        let i = states.len();
        index.insert(s.clone(), i);
        states.push(s.clone());
        queue.push_back(i);
        Ok(i)
    };
    let mut initial = Vec::new();
    for (s, p) in inits[0].iter() {
        initial.push((intern(s, &mut states, &mut queue)?, p.clone()));
    }
    initial.sort_by_key(|(i, _)| *i);

    let mut actions: Vec<Vec<Action<S>>> = Vec::new();
    while let Some(i) = queue.pop_front() {
        let s = states[i].clone();
        let mut acts = Vec::new();
        for (k, (name, guard, body)) in steps.iter().enumerate() {
            let enabled = guard
                .eval_bool(&s)
                .map_err(|e| MdpError::Step { op: name.clone(), source: Box::new(e.into()) })?;
            if !enabled {
                continue;
            }
            let outs = resolutions::<S>(body, &s, &env)
                .map_err(|e| MdpError::Step { op: name.clone(), source: Box::new(e) })?;
            for d in outs {
                let mut dist = Vec::with_capacity(d.len());
                for (t, p) in d.iter() {
                    dist.push((intern(t, &mut states, &mut queue)?, p.clone()));
                }
                dist.sort_by_key(|(t, _)| *t);
                acts.push(Action { label: name.clone(), op: Some(k), dist });
            }
        }
        if acts.is_empty() {
            acts.push(Action { label: Name::from(SKIP), op: None, dist: vec![(i, S::one())] });
        }
        debug_assert_eq!(actions.len(), i);
        actions.push(acts);
    }
    ExplicitMdp::from_parts(m.var_order(), states, initial, actions)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Mode {
    Min,
    Max,
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Mode::Min => write!(f, "min"),
            Mode::Max => write!(f, "max"),
        }
    }
}

/// Deterministic history-free scheduler for a fixed horizon:
/// `(depth, state) -> action index`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Scheduler {
    choice: Vec<Vec<usize>>,
}

impl Scheduler {
    pub fn from_fn(horizon: usize, num_states: usize, f: impl Fn(usize, usize) -> usize) -> Self {
        Scheduler {
            choice: (0..horizon).map(|d| (0..num_states).map(|s| f(d, s)).collect()).collect(),
        }
    }

    pub fn horizon(&self) -> usize {
        self.choice.len()
    }

    pub fn action(&self, depth: usize, state: usize) -> usize {
        self.choice[depth][state]
    }
}

#[derive(Clone, Debug)]
pub struct Extremal<S> {
    /// Value at the initial distribution.
    pub value: S,
    /// Value of the `K`-step problem from each state.
    pub per_state: Vec<S>,
    pub scheduler: Scheduler,
}

/// Extremal expected value of `e` after exactly `k` steps.
pub fn extremal_value<S: Scalar>(mdp: &ExplicitMdp<S>, e: &Expr, k: usize, mode: Mode) -> Result<Extremal<S>, MdpError> {
    let terminal = mdp.eval_all(e)?;
    Ok(extremal_from(mdp, terminal, k, mode))
}

/// Backward induction from arbitrary terminal values. Ties keep the lowest
/// action index.
pub fn extremal_from<S: Scalar>(mdp: &ExplicitMdp<S>, terminal: Vec<S>, k: usize, mode: Mode) -> Extremal<S> {
    let mut v = terminal;
    let mut choice = vec![Vec::new(); k];
    for depth in (0..k).rev() {
        let mut next = Vec::with_capacity(v.len());
        let mut pick = Vec::with_capacity(v.len());
        for acts in &mdp.actions {
            let mut best: Option<(usize, S)> = None;
            for (a, act) in acts.iter().enumerate() {
                let val = expect(&act.dist, &v);
                let better = match &best {
                    None => true,
                    Some((_, b)) => match mode {
                        Mode::Min => val < *b,
                        Mode::Max => val > *b,
                    },
                };
                if better {
                    best = Some((a, val));
                }
            }
            let (a, val) = best.expect("every state has an action");
            pick.push(a);
            next.push(val);
        }
        choice[depth] = pick;
        v = next;
    }
    let value = mdp.initial_value(&v);
    Extremal { value, per_state: v, scheduler: Scheduler { choice } }
}

/// Expected terminal value after `k` steps under a fixed scheduler,
/// computed backward.
pub fn policy_values<S: Scalar>(mdp: &ExplicitMdp<S>, sched: &Scheduler, terminal: Vec<S>, k: usize) -> Vec<S> {
    let mut v = terminal;
    for depth in (0..k).rev() {
        v = (0..mdp.num_states())
            .map(|s| expect(&mdp.actions[s][sched.action(depth, s)].dist, &v))
            .collect();
    }
    v
}

/// Distribution over states after `k` steps under `sched`, computed forward.
pub fn endpoint_distribution<S: Scalar>(mdp: &ExplicitMdp<S>, sched: &Scheduler, k: usize) -> Distribution<usize, S> {
    let mut cur: Vec<S> = vec![S::zero(); mdp.num_states()];
    for (i, p) in &mdp.initial {
        cur[*i] = cur[*i].clone() + p.clone();
    }
    for depth in 0..k {
        let mut next = vec![S::zero(); mdp.num_states()];
        for (s, mass) in cur.iter().enumerate() {
            if mass.is_zero() {
                continue;
            }
            for (t, p) in &mdp.actions[s][sched.action(depth, s)].dist {
                next[*t] = next[*t].clone() + mass.clone() * p.clone();
            }
        }
        cur = next;
    }
    Distribution::from_weights_unchecked(cur.into_iter().enumerate())
}

fn expect<S: Scalar>(dist: &[(usize, S)], v: &[S]) -> S {
    dist.iter().fold(S::zero(), |acc, (t, p)| acc + p.clone() * v[*t].clone())
}

#[derive(Clone, Debug, PartialEq)]
pub struct TreeNode<S> {
    pub state: usize,
    /// Action that produced this node; `INIT` for roots.
    pub label: Name,
    /// Probability of the path from the root to this node.
    pub prob: S,
    pub depth: usize,
    pub parent: Option<usize>,
    pub children: Vec<usize>,
}

/// All positive-probability paths of length `k` under a scheduler.
#[derive(Clone, Debug)]
pub struct FailureTree<S> {
    pub nodes: Vec<TreeNode<S>>,
    pub roots: Vec<usize>,
    pub horizon: usize,
}

/// A path through the tree, labelled by the action taken into each state.
#[derive(Clone, Debug, PartialEq)]
pub struct Trace<S> {
    pub steps: Vec<(Name, usize)>,
    pub prob: S,
}

impl<S: Scalar> Trace<S> {
    pub fn last(&self) -> usize {
        self.steps.last().map(|(_, s)| *s).expect("traces are non-empty")
    }

    pub fn render(&self, mdp: &ExplicitMdp<S>) -> String {
        let parts: Vec<String> = self
            .steps
            .iter()
            .map(|(l, s)| format!("{{{l}}} {}", mdp.tuple(*s)))
            .collect();
        format!("[{}]", parts.join(", "))
    }
}

/// Node cap for [`unfold_failure_tree`].
pub const MAX_TREE_NODES: usize = 2_000_000;

/// Unfolds the scheduler's behaviour for `k` steps. Branches whose path
/// probability falls below `prune_below` are dropped.
pub fn unfold_failure_tree<S: Scalar>(
    mdp: &ExplicitMdp<S>,
    sched: &Scheduler,
    k: usize,
    prune_below: Option<&S>,
) -> Result<FailureTree<S>, MdpError> {
    let mut nodes = Vec::new();
    let mut roots = Vec::new();
    let keep = |p: &S| prune_below.is_none_or(|t| p >= t);
    for (i, p) in &mdp.initial {
        if keep(p) {
            roots.push(nodes.len());
            nodes.push(TreeNode {
                state: *i,
                label: Name::from(INIT),
                prob: p.clone(),
                depth: 0,
                parent: None,
                children: Vec::new(),
            });
        }
    }
    let mut cursor = 0;
    while cursor < nodes.len() {
        let (state, depth, prob) = {
            let n = &nodes[cursor];
            (n.state, n.depth, n.prob.clone())
        };
        if depth < k {
            let act = &mdp.actions[state][sched.action(depth, state)];
            for (t, p) in &act.dist {
                let q = prob.clone() * p.clone();
                if !keep(&q) {
                    continue;
                }
                if nodes.len() >= MAX_TREE_NODES {
                    return Err(MdpError::TreeTooLarge(MAX_TREE_NODES));
                }
                let id = nodes.len();
                nodes.push(TreeNode {
                    state: *t,
                    label: act.label.clone(),
                    prob: q,
                    depth: depth + 1,
                    parent: Some(cursor),
                    children: Vec::new(),
                });
                nodes[cursor].children.push(id);
            }
        }
        cursor += 1;
    }
    Ok(FailureTree { nodes, roots, horizon: k })
}

impl<S: Scalar> FailureTree<S> {
    /// Path from a root to `node`.
    pub fn trace_to(&self, node: usize) -> Trace<S> {
        let mut steps = Vec::new();
        let mut cur = Some(node);
        while let Some(i) = cur {
            steps.push((self.nodes[i].label.clone(), self.nodes[i].state));
            cur = self.nodes[i].parent;
        }
        steps.reverse();
        Trace { steps, prob: self.nodes[node].prob.clone() }
    }

    /// Root-to-leaf traces at full depth, in unfolding order.
    pub fn leaf_traces(&self) -> Vec<Trace<S>> {
        self.nodes
            .iter()
            .enumerate()
            .filter(|(_, n)| n.depth == self.horizon)
            .map(|(i, _)| self.trace_to(i))
            .collect()
    }
}
