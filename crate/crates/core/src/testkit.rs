//! Random generators and brute-force oracles for property tests.
//!
//! The oracles deliberately avoid the memoised backward induction in
//! [`crate::mdp`]: they recurse over explicit paths, so agreement between
//! the two is evidence rather than tautology.

use num_rational::BigRational;
use num_traits::{One, Zero};
use rand::seq::SliceRandom;
use rand::Rng;

use crate::expr::Expr;
use crate::lang::Command;
use crate::mdp::{Action, ExplicitMdp, Mode, Scheduler, SKIP};
use crate::scalar::ratio;
use crate::value::{Name, State, Value};

pub use rand_chacha::ChaCha8Rng as TestRng;

/// Variables of generated commands; values stay within `0..=VAL_MAX`.
pub const VARS: [&str; 2] = ["x", "y"];
pub const VAL_MAX: i64 = 3;

pub fn rng(seed: u64) -> TestRng {
    rand::SeedableRng::seed_from_u64(seed)
}

const PROBS: [(i64, i64); 7] = [(0, 1), (1, 4), (1, 3), (1, 2), (2, 3), (3, 4), (1, 1)];

pub fn random_probability(r: &mut impl Rng) -> BigRational {
    let (n, d) = PROBS[r.gen_range(0..PROBS.len())];
    ratio(n, d)
}

fn var(r: &mut impl Rng) -> Expr {
    Expr::var(VARS[r.gen_range(0..VARS.len())])
}

/// An integer expression whose value stays in `0..=VAL_MAX` on states in range.
fn bounded_int(r: &mut impl Rng) -> Expr {
    match r.gen_range(0..5) {
        0 => Expr::int(r.gen_range(0..=VAL_MAX)),
        1 => var(r),
        2 => Expr::min(var(r) + Expr::int(1), Expr::int(VAL_MAX)),
        3 => Expr::max(var(r) - Expr::int(1), Expr::int(0)),
        _ => Expr::min(var(r), var(r)),
    }
}

pub fn random_predicate(r: &mut impl Rng) -> Expr {
    match r.gen_range(0..5) {
        0 => Expr::eq(var(r), Expr::int(r.gen_range(0..=VAL_MAX))),
        1 => Expr::cmp(crate::expr::CmpOp::Lt, var(r), var(r)),
        2 => Expr::cmp(crate::expr::CmpOp::Le, var(r), Expr::int(r.gen_range(0..=VAL_MAX))),
        3 => Expr::not(Expr::eq(var(r), var(r))),
        _ => Expr::and(
            Expr::cmp(crate::expr::CmpOp::Ge, var(r), Expr::int(1)),
            Expr::eq(var(r), Expr::int(r.gen_range(0..=VAL_MAX))),
        ),
    }
}

/// A random loop-free command of nesting depth at most `depth`.
pub fn random_command(r: &mut impl Rng, depth: usize) -> Command {
    let leaf = depth == 0 || r.gen_bool(0.3);
    if leaf {
        return match r.gen_range(0..4) {
            0 => Command::Skip,
            1 => Command::MultiAssign(vec![
                (Name::from("x"), bounded_int(r)),
                (Name::from("y"), bounded_int(r)),
            ]),
            _ => Command::assign(VARS[r.gen_range(0..2)], bounded_int(r)),
        };
    }
    let sub = |r: &mut _| random_command(r, depth - 1);
    match r.gen_range(0..5) {
        0 => {
            let (a, b) = (sub(r), sub(r));
            Command::seq(a, b)
        }
        1 => {
            let g = random_predicate(r);
            let (a, b) = (sub(r), sub(r));
            Command::cond(g, a, b)
        }
        2 => {
            let p = Expr::constant(random_probability(r));
            let (a, b) = (sub(r), sub(r));
            Command::pchoice(p, a, b)
        }
        3 => {
            let p = Expr::constant(random_probability(r));
            let (a, b) = (sub(r), sub(r));
            Command::pchoice_at_most(p, a, b)
        }
        _ => {
            let (a, b) = (sub(r), sub(r));
            Command::nd(a, b)
        }
    }
}

/// A random expectation, non-negative on states in range.
pub fn random_expectation(r: &mut impl Rng, depth: usize) -> Expr {
    if depth == 0 || r.gen_bool(0.3) {
        return match r.gen_range(0..3) {
            0 => Expr::constant(ratio(r.gen_range(0..5), r.gen_range(1..4))),
            1 => var(r),
            _ => Expr::lift(random_predicate(r)),
        };
    }
    let a = random_expectation(r, depth - 1);
    let b = random_expectation(r, depth - 1);
    match r.gen_range(0..5) {
        0 => a + b,
        1 => a * b,
        2 => Expr::min(a, b),
        3 => Expr::max(a, b),
        _ => Expr::cond(random_predicate(r), a, b),
    }
}

pub fn random_state(r: &mut impl Rng) -> State {
    VARS.iter().fold(State::new(), |s, v| s.with(v, Value::Int(r.gen_range(0..=VAL_MAX))))
}

/// Every state over [`VARS`] in range, canonical order.
pub fn all_states() -> Vec<State> {
    let mut out = Vec::new();
    for x in 0..=VAL_MAX {
        for y in 0..=VAL_MAX {
            out.push(State::from_pairs([("x", x), ("y", y)]));
        }
    }
    out.sort();
    out
}

/// A random distribution over `0..n` with support size at most `max_support`,
/// weights drawn from small integers.
pub fn random_distribution(r: &mut impl Rng, n: usize, max_support: usize) -> Vec<(usize, BigRational)> {
    let mut targets: Vec<usize> = (0..n).collect();
    targets.shuffle(r);
    targets.truncate(r.gen_range(1..=max_support.min(n)));
    targets.sort();
    let weights: Vec<i64> = targets.iter().map(|_| r.gen_range(1..5)).collect();
    let total: i64 = weights.iter().sum();
    targets.into_iter().zip(weights).map(|(t, w)| (t, ratio(w, total))).collect()
}

/// A random MDP over states `{s: i}`, every state reachable-or-not, each with
/// one to `max_actions` actions.
pub fn random_mdp(r: &mut impl Rng, max_states: usize, max_actions: usize) -> ExplicitMdp<BigRational> {
    let n = r.gen_range(1..=max_states);
    let states: Vec<State> = (0..n as i64).map(|i| State::from_pairs([("s", i)])).collect();
    let actions = (0..n)
        .map(|_| {
            (0..r.gen_range(1..=max_actions))
                .map(|a| Action {
                    label: Name::from(format!("a{a}")),
                    op: Some(a),
                    dist: random_distribution(r, n, 3),
                })
                .collect()
        })
        .collect();
    let initial = if r.gen_bool(0.8) { vec![(0, BigRational::one())] } else { random_distribution(r, n, 2) };
    ExplicitMdp::from_parts(vec![Name::from("s")], states, initial, actions).expect("generated MDP is valid")
}

/// Random predicate over a generated MDP's `s` variable.
pub fn random_state_predicate(r: &mut impl Rng, n: usize) -> Expr {
    let members: Vec<Value> = (0..n as i64).filter(|_| r.gen_bool(0.4)).map(Value::Int).collect();
    Expr::member(Expr::var("s"), members)
}

/// Uniformly random depth-indexed scheduler.
pub fn random_scheduler<S>(r: &mut impl Rng, mdp: &ExplicitMdp<S>, k: usize) -> Scheduler {
    let choices: Vec<Vec<usize>> = (0..k)
        .map(|_| mdp.actions.iter().map(|a| r.gen_range(0..a.len())).collect())
        .collect();
    Scheduler::from_fn(k, mdp.actions.len(), |d, s| choices[d][s])
}

/// Every depth-indexed deterministic scheduler, or `None` when there are more
/// than `limit`.
pub fn enumerate_schedulers<S>(mdp: &ExplicitMdp<S>, k: usize, limit: usize) -> Option<Vec<Scheduler>> {
    let slots: Vec<(usize, usize, usize)> = (0..k)
        .flat_map(|d| (0..mdp.actions.len()).map(move |s| (d, s)))
        .filter_map(|(d, s)| (mdp.actions[s].len() > 1).then_some((d, s, mdp.actions[s].len())))
        .collect();
    let mut count: usize = 1;
    for (_, _, m) in &slots {
        count = count.checked_mul(*m).filter(|c| *c <= limit)?;
    }
    let n = mdp.actions.len();
    let mut out = Vec::with_capacity(count);
    let mut digits = vec![0usize; slots.len()];
    loop {
        let mut table = vec![vec![0usize; n]; k];
        for ((d, s, _), v) in slots.iter().zip(&digits) {
            table[*d][*s] = *v;
        }
        out.push(Scheduler::from_fn(k, n, |d, s| table[d][s]));
        let mut i = 0;
        loop {
            if i == slots.len() {
                return Some(out);
            }
            digits[i] += 1;
            if digits[i] < slots[i].2 {
                break;
            }
            digits[i] = 0;
            i += 1;
        }
    }
}

/// Expected terminal value after `k` steps under `sched`, by recursion over
/// every explicit path from the initial distribution.
pub fn path_value(
    mdp: &ExplicitMdp<BigRational>,
    sched: &Scheduler,
    terminal: &[BigRational],
    k: usize,
) -> BigRational {
    fn go(
        mdp: &ExplicitMdp<BigRational>,
        sched: &Scheduler,
        terminal: &[BigRational],
        k: usize,
        depth: usize,
        s: usize,
    ) -> BigRational {
        if depth == k {
            return terminal[s].clone();
        }
        let act = &mdp.actions[s][sched.action(depth, s)];
        act.dist
            .iter()
            .map(|(t, p)| p * go(mdp, sched, terminal, k, depth + 1, *t))
            .fold(BigRational::zero(), |a, b| a + b)
    }
    mdp.initial
        .iter()
        .map(|(s, p)| p * go(mdp, sched, terminal, k, 0, *s))
        .fold(BigRational::zero(), |a, b| a + b)
}

/// Extremal expected terminal value over all history-dependent schedulers,
/// by unmemoised recursion choosing the best action at every path node.
pub fn brute_extremal(mdp: &ExplicitMdp<BigRational>, terminal: &[BigRational], k: usize, mode: Mode) -> BigRational {
    fn go(mdp: &ExplicitMdp<BigRational>, terminal: &[BigRational], left: usize, s: usize, mode: Mode) -> BigRational {
        if left == 0 {
            return terminal[s].clone();
        }
        let vals = mdp.actions[s].iter().map(|a| {
            a.dist
                .iter()
                .map(|(t, p)| p * go(mdp, terminal, left - 1, *t, mode))
                .fold(BigRational::zero(), |x, y| x + y)
        });
        let pick = |a: BigRational, b: BigRational| match mode {
            Mode::Min => a.min(b),
            Mode::Max => a.max(b),
        };
        vals.reduce(pick).expect("actions are non-empty")
    }
    mdp.initial
        .iter()
        .map(|(s, p)| p * go(mdp, terminal, k, *s, mode))
        .fold(BigRational::zero(), |a, b| a + b)
}

/// One state with only the stutter action.
pub fn stutter_mdp() -> ExplicitMdp<BigRational> {
    ExplicitMdp::from_parts(
        vec![Name::from("s")],
        vec![State::from_pairs([("s", 0i64)])],
        vec![(0, BigRational::one())],
        vec![vec![Action { label: Name::from(SKIP), op: None, dist: vec![(0, BigRational::one())] }]],
    )
    .expect("valid")
}
