use num_traits::Zero;
use pbcheck_core::failure::{
    conditional_probability, critical_sets, min_discriminant, monitor, scheduler_conditional,
    scheduler_discriminant, time_to_failure, Conditional, FailureSet,
};
use pbcheck_core::mdp::{build_mdp, BuildOptions, Mode};
use pbcheck_core::models::{controller_atoms, controller_failure, controller_model, ControllerParams};
use pbcheck_core::scalar::ratio;
use pbcheck_core::testkit::{self, enumerate_schedulers};
use pbcheck_core::{refines, ExactMdp, Expr, Name, Rational};
use proptest::prelude::*;
use rand::Rng;

fn controller(p: &ControllerParams) -> (ExactMdp, FailureSet, Vec<(Name, Expr)>) {
    let m = controller_model(p).unwrap();
    let mdp: ExactMdp = build_mdp(&m, BuildOptions::default()).unwrap();
    let fail = FailureSet::certain(&mdp, &controller_failure(&m)).unwrap();
    (mdp, fail, controller_atoms(&m))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(120))]

    /// Per scheduler, the discriminant is non-negative exactly when the
    /// conditional reaches λ, and its minimum is attained by enumeration.
    #[test]
    fn discriminant_matches_quotient(seed in any::<u64>(), k in 0usize..=3) {
        let mut r = testkit::rng(seed);
        let mdp = testkit::random_mdp(&mut r, 4, 2);
        let f = testkit::random_state_predicate(&mut r, mdp.num_states());
        let c = testkit::random_state_predicate(&mut r, mdp.num_states());
        let mm = monitor(&mdp, &FailureSet::exact(&mdp, &f).unwrap(), &[(Name::from("C"), c)]).unwrap();
        let (x, cond) = (mm.seen_failure(), mm.seen("C"));
        let Some(all) = enumerate_schedulers(&mm.mdp, k, 2048) else { return Ok(()) };
        for lambda in [ratio(1, 4), ratio(1, 2), ratio(1, 1)] {
            let mut least: Option<Rational> = None;
            for s in &all {
                let q = scheduler_conditional(&mm, s, &x, &cond, k).unwrap();
                let d = scheduler_discriminant(&mm, s, &x, &cond, &lambda, k).unwrap();
                prop_assert_eq!(q.at_least(&lambda), d >= Rational::zero());
                least = Some(least.map_or(d.clone(), |l| l.min(d)));
            }
            prop_assert_eq!(least.unwrap(), min_discriminant(&mm, &x, &cond, &lambda, k).unwrap());
        }
    }

    /// Flags latch: once set in a product state, every successor keeps them.
    #[test]
    fn monitor_flags_latch(seed in any::<u64>()) {
        let mut r = testkit::rng(seed);
        let mdp = testkit::random_mdp(&mut r, 5, 2);
        let f = testkit::random_state_predicate(&mut r, mdp.num_states());
        let c = testkit::random_state_predicate(&mut r, mdp.num_states());
        let mm = monitor(&mdp, &FailureSet::exact(&mdp, &f).unwrap(), &[(Name::from("C"), c)]).unwrap();
        for (s, acts) in mm.mdp.actions.iter().enumerate() {
            for (t, _) in acts.iter().flat_map(|a| a.dist.iter()) {
                prop_assert!(!mm.flag(s, "C") || mm.flag(*t, "C"));
            }
        }
    }

    /// The certain-failure closure contains the failure states.
    #[test]
    fn certain_failure_contains_failure(seed in any::<u64>()) {
        let mut r = testkit::rng(seed);
        let mdp = testkit::random_mdp(&mut r, 6, 2);
        let f = testkit::random_state_predicate(&mut r, mdp.num_states());
        let exact = FailureSet::exact(&mdp, &f).unwrap();
        let certain = FailureSet::certain(&mdp, &f).unwrap();
        for (a, b) in exact.member.iter().zip(&certain.member) {
            prop_assert!(!a || *b);
        }
    }

    /// Pointwise refinement is reflexive and transitive.
    #[test]
    fn refinement_is_a_preorder(seed in any::<u64>()) {
        let mut r = testkit::rng(seed);
        let states = testkit::all_states();
        let a = testkit::random_expectation(&mut r, 2);
        let b = a.clone() + testkit::random_expectation(&mut r, 1);
        let c = if r.gen_bool(0.5) { b.clone() + testkit::random_expectation(&mut r, 1) } else { testkit::random_expectation(&mut r, 2) };
        prop_assert!(refines::<Rational>(&a, &a, &states).unwrap().holds());
        prop_assert!(refines::<Rational>(&a, &b, &states).unwrap().holds());
        if refines::<Rational>(&b, &c, &states).unwrap().holds() {
            prop_assert!(refines::<Rational>(&a, &c, &states).unwrap().holds());
        }
    }
}

#[test]
fn time_to_failure_is_monotone() {
    for refire in [false, true] {
        let p = ControllerParams { refire, ..ControllerParams::default() };
        let (mdp, fail, atoms) = controller(&p);
        for pick in [vec![0, 1], vec![2, 4], vec![2, 3], vec![1, 2]] {
            let prof = time_to_failure(&mdp, &fail, &atoms, &pick, 6).unwrap();
            for w in prof.entries.windows(2) {
                assert!(w[0].joint <= w[1].joint, "{pick:?}");
            }
            let first = prof.entries.iter().find(|e| !e.joint.is_zero()).map(|e| e.k);
            assert_eq!(first, prof.first_failure_step);
        }
    }
}

#[test]
fn critical_sets_form_an_antichain() {
    for both in [false, true] {
        let p = ControllerParams { primary_requires_both: both, ..ControllerParams::default() };
        let (mdp, fail, atoms) = controller(&p);
        let sets = critical_sets(&mdp, &fail, &atoms, 6, 3).unwrap();
        assert!(!sets.is_empty());
        for a in &sets {
            for b in &sets {
                if a != b {
                    assert!(!a.atoms.iter().all(|i| b.atoms.contains(i)), "{:?} within {:?}", a.names, b.names);
                }
            }
        }
    }
}

#[test]
fn dead_sensors_guarantee_failure() {
    let (mdp, fail, atoms) = controller(&ControllerParams::default());
    let mm = monitor(&mdp, &fail, &[(Name::from("S1,S2"), Expr::and(atoms[0].1.clone(), atoms[1].1.clone()))]).unwrap();
    let q = conditional_probability(&mm, &mm.seen_failure(), &mm.seen("S1,S2"), 6, Mode::Min).unwrap();
    assert_eq!(q, Conditional::Defined(ratio(1, 1)));
}
