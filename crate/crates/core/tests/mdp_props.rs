use num_traits::{One, Zero};
use pbcheck_core::mdp::{endpoint_distribution, extremal_from, policy_values, unfold_failure_tree, Mode};
use pbcheck_core::scalar::ratio;
use pbcheck_core::testkit::{self, brute_extremal, enumerate_schedulers, path_value};
use pbcheck_core::{ExactMdp, Rational};
use proptest::prelude::*;
use rand::Rng;

fn terminal(r: &mut testkit::TestRng, mdp: &ExactMdp) -> Vec<Rational> {
    (0..mdp.num_states()).map(|_| ratio(r.gen_range(0..5), r.gen_range(1..3))).collect()
}

fn forward(mdp: &ExactMdp, sched: &pbcheck_core::mdp::Scheduler, t: &[Rational], k: usize) -> Rational {
    endpoint_distribution(mdp, sched, k)
        .iter()
        .fold(Rational::zero(), |a, (s, p)| a + p.clone() * t[*s].clone())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn forward_backward_and_paths_agree(seed in any::<u64>(), k in 0usize..=5) {
        let mut r = testkit::rng(seed);
        let mdp = testkit::random_mdp(&mut r, 6, 3);
        let t = terminal(&mut r, &mdp);
        let sched = testkit::random_scheduler(&mut r, &mdp, k);
        let back = mdp.initial_value(&policy_values(&mdp, &sched, t.clone(), k));
        prop_assert_eq!(&back, &forward(&mdp, &sched, &t, k));
        prop_assert_eq!(&back, &path_value(&mdp, &sched, &t, k));
    }

    #[test]
    fn extremal_matches_enumeration(seed in any::<u64>(), k in 0usize..=5) {
        let mut r = testkit::rng(seed);
        let mdp = testkit::random_mdp(&mut r, 6, 2);
        let t = terminal(&mut r, &mdp);
        if let Some(all) = enumerate_schedulers(&mdp, k, 4096) {
            let vals: Vec<Rational> = all.iter().map(|s| path_value(&mdp, s, &t, k)).collect();
            let min = vals.iter().min().unwrap();
            let max = vals.iter().max().unwrap();
            let lo = extremal_from(&mdp, t.clone(), k, Mode::Min);
            let hi = extremal_from(&mdp, t.clone(), k, Mode::Max);
            prop_assert_eq!(&lo.value, min);
            prop_assert_eq!(&hi.value, max);
            // The returned scheduler attains the value it reports.
            prop_assert_eq!(&path_value(&mdp, &lo.scheduler, &t, k), min);
            prop_assert_eq!(&path_value(&mdp, &hi.scheduler, &t, k), max);
        }
        // History-dependent schedulers do no better than depth-indexed ones.
        prop_assert_eq!(brute_extremal(&mdp, &t, k, Mode::Min), extremal_from(&mdp, t.clone(), k, Mode::Min).value);
        prop_assert_eq!(brute_extremal(&mdp, &t, k, Mode::Max), extremal_from(&mdp, t, k, Mode::Max).value);
    }

    #[test]
    fn endpoint_distributions_sum_to_one(seed in any::<u64>()) {
        let mut r = testkit::rng(seed);
        let mdp = testkit::random_mdp(&mut r, 6, 3);
        let sched = testkit::random_scheduler(&mut r, &mdp, 8);
        for k in 0..=8 {
            prop_assert_eq!(endpoint_distribution(&mdp, &sched, k).total(), Rational::one());
        }
    }

    #[test]
    fn failure_tree_leaves_match_endpoint(seed in any::<u64>(), k in 0usize..=4) {
        let mut r = testkit::rng(seed);
        let mdp = testkit::random_mdp(&mut r, 5, 2);
        let sched = testkit::random_scheduler(&mut r, &mdp, k);
        let tree = unfold_failure_tree(&mdp, &sched, k, None).unwrap();
        let end = endpoint_distribution(&mdp, &sched, k);
        let mut mass = vec![Rational::zero(); mdp.num_states()];
        for tr in tree.leaf_traces() {
            prop_assert_eq!(tr.steps.len(), k + 1);
            mass[tr.last()] += tr.prob.clone();
        }
        for (s, m) in mass.iter().enumerate() {
            prop_assert_eq!(m, &end.prob(&s));
        }
    }

    #[test]
    fn float_route_tracks_exact_route(seed in any::<u64>(), k in 0usize..=5) {
        let mut r = testkit::rng(seed);
        let mdp = testkit::random_mdp(&mut r, 6, 3);
        let t = terminal(&mut r, &mdp);
        let fm = mdp.convert(pbcheck_core::Scalar::to_f64);
        let ft: Vec<f64> = t.iter().map(pbcheck_core::Scalar::to_f64).collect();
        let exact = extremal_from(&mdp, t, k, Mode::Min).value;
        let approx = extremal_from(&fm, ft, k, Mode::Min).value;
        prop_assert!((pbcheck_core::Scalar::to_f64(&exact) - approx).abs() < 1e-9);
    }
}

#[test]
fn stutter_keeps_everything() {
    let mdp = testkit::stutter_mdp();
    let sched = pbcheck_core::mdp::Scheduler::from_fn(3, 1, |_, _| 0);
    assert_eq!(endpoint_distribution(&mdp, &sched, 3).prob(&0), Rational::one());
}
