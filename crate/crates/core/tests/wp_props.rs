use num_traits::{One, Zero};
use pbcheck_core::lang::{desugar_atmost, parse_command, parse_expr, Command};
use pbcheck_core::mdp::{build_mdp, BuildOptions};
use pbcheck_core::models::{faulty_model, mincut_model};
use pbcheck_core::scalar::ratio;
use pbcheck_core::semantics::Env;
use pbcheck_core::testkit::{self, all_states};
use pbcheck_core::wp::{check_annotation, check_obligations, eval_wp_at, eval_wp_with, wp, Annotation, WpOptions};
use pbcheck_core::{ExactMdp, Expr, Rational, State};
use proptest::prelude::*;

fn at(c: &Command, e: &Expr, s: &State) -> Rational {
    eval_wp_at(c, e, s).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(500))]

    #[test]
    fn wp_is_monotone(seed in any::<u64>()) {
        let mut r = testkit::rng(seed);
        let c = testkit::random_command(&mut r, 3);
        let e = testkit::random_expectation(&mut r, 2);
        let bigger = e.clone() + testkit::random_expectation(&mut r, 2);
        for s in &all_states() {
            prop_assert!(at(&c, &e, s) <= at(&c, &bigger, s), "{c} at {s}");
        }
    }

    #[test]
    fn probabilistic_row_is_linear(seed in any::<u64>()) {
        let mut r = testkit::rng(seed);
        let (a, b) = (testkit::random_command(&mut r, 2), testkit::random_command(&mut r, 2));
        let p = testkit::random_probability(&mut r);
        let e = testkit::random_expectation(&mut r, 2);
        let c = Command::pchoice(Expr::constant(p.clone()), a.clone(), b.clone());
        for s in &all_states() {
            let want = p.clone() * at(&a, &e, s) + (Rational::one() - p.clone()) * at(&b, &e, s);
            prop_assert_eq!(at(&c, &e, s), want);
        }
    }

    #[test]
    fn wp_is_sublinear(seed in any::<u64>()) {
        let mut r = testkit::rng(seed);
        let c = testkit::random_command(&mut r, 3);
        let (e1, e2) = (testkit::random_expectation(&mut r, 2), testkit::random_expectation(&mut r, 2));
        let (a, b) = (testkit::random_probability(&mut r), testkit::random_probability(&mut r));
        let combo = Expr::constant(a.clone()) * e1.clone() + Expr::constant(b.clone()) * e2.clone();
        for s in &all_states() {
            prop_assert!(a.clone() * at(&c, &e1, s) + b.clone() * at(&c, &e2, s) <= at(&c, &combo, s));
        }
    }

    #[test]
    fn symbolic_and_pointwise_agree(seed in any::<u64>()) {
        let mut r = testkit::rng(seed);
        let c = testkit::random_command(&mut r, 3);
        let e = testkit::random_expectation(&mut r, 2);
        let w = wp(&c, &e).unwrap();
        for s in &all_states() {
            prop_assert_eq!(w.eval_scalar::<Rational>(s).unwrap(), at(&c, &e, s));
        }
    }

    #[test]
    fn desugaring_preserves_wp_and_is_idempotent(seed in any::<u64>()) {
        let mut r = testkit::rng(seed);
        let c = testkit::random_command(&mut r, 3);
        let d = desugar_atmost(&c);
        prop_assert_eq!(desugar_atmost(&d), d.clone());
        let e = testkit::random_expectation(&mut r, 2);
        for s in &all_states() {
            prop_assert_eq!(at(&c, &e, s), at(&d, &e, s));
        }
    }

    #[test]
    fn printed_commands_reparse(seed in any::<u64>()) {
        let mut r = testkit::rng(seed);
        let c = testkit::random_command(&mut r, 3);
        let back = parse_command(&c.to_string()).unwrap();
        let e = testkit::random_expectation(&mut r, 1);
        for s in &all_states() {
            prop_assert_eq!(at(&c, &e, s), at(&back, &e, s));
        }
    }

    #[test]
    fn lift_is_zero_or_one(seed in any::<u64>()) {
        let mut r = testkit::rng(seed);
        let e = Expr::lift(testkit::random_predicate(&mut r));
        for s in &all_states() {
            let v: Rational = e.eval_scalar(s).unwrap();
            prop_assert!(v.is_zero() || v.is_one());
        }
    }
}

fn pinc(p: &Rational) -> Command {
    parse_command(&format!("s := s + 1 pchoice {p} or s := s - 1")).unwrap()
}

fn s_range() -> Vec<State> {
    (-2..=2).map(|v| State::from_pairs([("s", v)])).collect()
}

#[test]
fn state_zero_annotation_holds_for_every_p() {
    let post = parse_expr("lift[s = 0]").unwrap();
    for p in [ratio(1, 4), ratio(1, 2), ratio(3, 4)] {
        let pre = parse_expr(&format!("{p} * lift[s = -1] + (1 - {p}) * lift[s = 1]")).unwrap();
        let a = Annotation { pre: pre.clone(), prog: pinc(&p), post: post.clone() };
        assert!(check_annotation::<Rational>(&a, &s_range(), &Env::unconstrained()).unwrap().valid);
        // Exact, not merely a lower bound.
        for s in s_range() {
            assert_eq!(pre.eval_scalar::<Rational>(&s).unwrap(), at(&pinc(&p), &post, &s));
        }
    }
}

#[test]
fn identity_annotation_needs_p_at_least_half() {
    let s = Expr::var("s");
    for (p, valid) in [(ratio(1, 2), true), (ratio(3, 5), true), (ratio(2, 5), false), (ratio(0, 1), false)] {
        let a = Annotation { pre: s.clone(), prog: pinc(&p), post: s.clone() };
        let v = check_annotation::<Rational>(&a, &s_range(), &Env::unconstrained()).unwrap();
        assert_eq!(v.valid, valid, "p = {p}");
        if !valid {
            assert_eq!(v.witnesses.len(), 5);
            let gap = Rational::one() - ratio(2, 1) * p.clone();
            assert!(v.witnesses.iter().all(|w| w.pre.clone() - w.wp.clone() == gap));
        }
    }
}

#[test]
fn correct_mincut_obligations_hold() {
    for nn in 3..=12 {
        let m = mincut_model(nn, false).unwrap();
        let res = check_obligations::<Rational>(&m).unwrap();
        assert_eq!(res.len(), 2);
        assert!(res.iter().all(|(_, v)| v.valid), "NN = {nn}");
    }
}

#[test]
fn buggy_mincut_merge_obligation_fails() {
    let m = mincut_model(3, true).unwrap();
    let res = check_obligations::<Rational>(&m).unwrap();
    let (ob, v) = &res[1];
    assert_eq!(&*ob.name, "merge");
    assert!(!v.valid);
    let w = v.witnesses.iter().find(|w| w.state.get("nn").map(|x| x.to_string()) == Some("3".into())).unwrap();
    assert_eq!(w.pre, ratio(1, 3));
    assert_eq!(w.wp, ratio(1, 4));
}

#[test]
fn faulty_counter_is_preserved_except_at_the_clamp() {
    let m = faulty_model(&ratio(1, 2), 10, true).unwrap();
    let res = check_obligations::<Rational>(&m).unwrap();
    assert_eq!(res.len(), 3);
    assert!(res[0].1.valid);
    let opx = &res[1].1;
    let at_boundary: Vec<String> = opx.witnesses.iter().map(|w| w.state.to_string()).collect();
    assert_eq!(opx.witnesses.len(), 1, "{at_boundary:?}");
    assert_eq!(opx.witnesses[0].pre, ratio(10, 1));
    assert!(!res[2].1.valid);
}

/// The MDP's one-step expectation agrees with pointwise wp for every op.
#[test]
fn mdp_step_matches_wp() {
    for m in [faulty_model(&ratio(1, 3), 6, true).unwrap(), mincut_model(6, true).unwrap()] {
        let mdp: ExactMdp = build_mdp(&m, BuildOptions::default()).unwrap();
        let env = Env::of_machine(&m);
        let post = m.expectations.clone().unwrap().1;
        let values = mdp.eval_all(&post).unwrap();
        for (s, acts) in mdp.actions.iter().enumerate() {
            for (i, op) in m.ops.iter().enumerate() {
                let mine: Vec<Rational> = acts
                    .iter()
                    .filter(|a| a.op == Some(i))
                    .map(|a| a.dist.iter().fold(Rational::zero(), |x, (t, p)| x + p.clone() * values[*t].clone()))
                    .collect();
                let Some(min) = mine.into_iter().reduce(|a, b| a.min(b)) else { continue };
                let (_, body) = op.step_form();
                let w: Rational = eval_wp_with(
                    &body,
                    &|t| Ok(post.eval_scalar(t)?),
                    &mdp.states[s],
                    &env,
                    WpOptions::default(),
                )
                .unwrap();
                assert_eq!(min, w, "{} at {}", op.name, mdp.states[s]);
            }
        }
    }
}
