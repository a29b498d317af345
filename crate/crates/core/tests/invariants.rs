mod common;

use common::{random_game, random_strategy, Shape};
use ctxstack::env::{build_olt_instance, OltState};
use ctxstack::geometry::{approx_extreme_points, barycentric_spanner, contextual_regions, indicator_set};
use ctxstack::harness::{benchmark_policy, regret_report, run_seed};
use ctxstack::learners::{Algorithm, Estimator, FollowerEstimate, HedgeState, LearnerParams, Menu};
use ctxstack::{Context, Exec, MixedStrategy};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn shape() -> impl Strategy<Value = (Shape, u64)> {
    (
        1usize..=3,
        2usize..=3,
        2usize..=3,
        1usize..=3,
        any::<bool>(),
        any::<u64>(),
    )
        .prop_map(|(k, a, af, n, q, seed)| {
            (
                Shape {
                    types: k,
                    leader_actions: a,
                    follower_actions: af,
                    contexts: n,
                    quantum: q.then_some(4),
                    context_free_followers: false,
                },
                seed,
            )
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn hedge_weights_form_a_distribution(
        eta in 1e-4f64..5.0,
        rounds in prop::collection::vec(prop::collection::vec(-1.0f64..1.0, 4), 0..60),
    ) {
        let mut h = HedgeState::new(4, eta, (-1.0, 1.0)).unwrap();
        for l in &rounds {
            h.update(l).unwrap();
            let p = h.probabilities();
            prop_assert!(p.iter().all(|v| *v >= 0.0 && v.is_finite()));
            prop_assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            // a smaller cumulative loss never gets less weight
            let l = h.cumulative_loss();
            for i in 0..4 {
                for j in 0..4 {
                    if l[i] < l[j] {
                        prop_assert!(p[i] >= p[j]);
                    }
                }
            }
        }
    }

    #[test]
    fn type_frequency_matches_counts(types in prop::collection::vec(0usize..3, 1..200)) {
        let mut est = FollowerEstimate::new(Estimator::TypeFreq, 3, 2);
        for &f in &types {
            est.record(f);
        }
        let p = est.type_probs();
        for (i, pi) in p.iter().enumerate() {
            let c = types.iter().filter(|&&f| f == i).count() as f64;
            prop_assert!((pi - c / types.len() as f64).abs() < 1e-15);
        }
    }

    #[test]
    fn best_response_lies_in_its_region((shape, seed) in shape()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let g = random_game(&mut rng, shape);
        let z = &g.contexts[0];
        let regions = contextual_regions(&g.inst, z, Exec::Sequential).unwrap();
        for _ in 0..20 {
            let x = random_strategy(&mut rng, shape.leader_actions, None);
            let sigma: Vec<usize> = (0..shape.types).map(|i| g.best_response(i, 0, x.probs())).collect();
            let region = regions.iter().find(|r| r.sigma.0.iter().map(|a| a.0).collect::<Vec<_>>() == sigma);
            prop_assert!(region.is_some(), "no nonempty region for {:?}", sigma);
            for h in &region.unwrap().halfspaces {
                prop_assert!(h.value(x.probs()) >= -1e-9);
            }
        }
    }

    #[test]
    fn extreme_points_respond_as_labeled((shape, seed) in shape(), delta in 1e-4f64..1e-2) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let g = random_game(&mut rng, shape);
        for (c, z) in g.contexts.iter().enumerate() {
            let set = approx_extreme_points(&g.inst, z, delta, Exec::Sequential).unwrap();
            prop_assert!(!set.is_empty());
            for p in &set.points {
                let sigma: Vec<usize> = (0..shape.types).map(|i| g.best_response(i, c, p.x.probs())).collect();
                prop_assert_eq!(sigma, p.sigma.0.iter().map(|a| a.0).collect::<Vec<_>>());
                prop_assert!(p.x.l1_distance(&p.vertex) <= delta + 1e-12);
            }
        }
    }

    #[test]
    fn spanner_coefficients_are_bounded((shape, seed) in shape()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let g = random_game(&mut rng, Shape { context_free_followers: true, ..shape });
        let set = approx_extreme_points(&g.inst, &g.contexts[0], 1e-3, Exec::Sequential).unwrap();
        let w = indicator_set(&g.inst, &set).unwrap();
        let sp = barycentric_spanner(&w);
        for e in &w {
            let v = e.bits.as_f64();
            let lambda = sp.coefficients(&v);
            prop_assert!(lambda.iter().all(|l| l.abs() <= sp.coefficient_bound() + 1e-7));
            for (a, b) in v.iter().zip(sp.reconstruct(&lambda)) {
                prop_assert!((a - b).abs() <= 1e-7);
            }
        }
    }

    #[test]
    fn benchmark_beats_every_fixed_menu_choice((shape, seed) in shape(), horizon in 1usize..40) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let g = random_game(&mut rng, shape);
        let ctx: Vec<usize> = (0..horizon).map(|t| (seed as usize + t * 7) % g.contexts.len()).collect();
        let types: Vec<usize> = (0..horizon).map(|t| (t * 5 + seed as usize) % shape.types).collect();
        let contexts: Vec<Context> = ctx.iter().map(|&c| g.contexts[c].clone()).collect();
        let bench = benchmark_policy(&g.inst, &contexts, &types, 1e-3, Exec::Sequential).unwrap();
        for (c, z) in g.contexts.iter().enumerate() {
            let rounds: Vec<usize> = (0..horizon).filter(|&t| ctx[t] == c).collect();
            let got: f64 = rounds.iter().map(|&t| bench.per_round[t]).sum();
            let menu = Menu::build(&g.inst, z, 1e-3, Exec::Sequential).unwrap();
            for j in 0..menu.len() {
                let alt: f64 = rounds.iter().map(|&t| menu.utility_vs_type(j, types[t])).sum();
                prop_assert!(got >= alt - 1e-9);
            }
        }
    }

    #[test]
    fn threshold_adversary_caps_each_round(xs in prop::collection::vec(0.0f64..=1.0, 1..60)) {
        let inst = build_olt_instance();
        let mut state = OltState::new();
        for x0 in xs {
            let x = MixedStrategy::new(vec![x0, 1.0 - x0]).unwrap();
            let z = state.context();
            let (f, next) = state.step(&x);
            let a = inst.follower_best_response(f, &z, &x).unwrap();
            prop_assert!(inst.expected_leader_utility(&z, &x, a).unwrap() <= 0.5 + 1e-12);
            state = next;
            prop_assert!(state.consistent_threshold().is_some());
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn regret_is_benchmark_minus_learner(seed in any::<u64>(), alg_idx in 0usize..3) {
        let inst = common::load_instance("mirror8.json");
        let alg = [Algorithm::GreedyTypefreq, Algorithm::GreedyActionfreq, Algorithm::Hedge][alg_idx];
        let params = LearnerParams { m: Some(4), ..LearnerParams::default() };
        let tr = run_seed(&inst, "fully-stochastic", alg, &params, 60, seed).unwrap();
        let rep = regret_report(&inst, &tr, params.delta_for(60), Exec::Sequential).unwrap();
        let bench = benchmark_policy(&inst, &tr.contexts(), &tr.types, params.delta_for(60), Exec::Sequential).unwrap();
        let learner: f64 = tr.records.iter().map(|r| r.expected_utility).sum();
        prop_assert!((rep.cumulative_regret[59] - (bench.total() - learner)).abs() < 1e-9);
        for t in 0..60 {
            prop_assert!((rep.cumulative_regret[t] - (rep.benchmark_utility[t] - rep.learner_utility[t])).abs() < 1e-12);
        }
    }

    #[test]
    fn runs_are_deterministic(seed in any::<u64>(), alg_idx in 0usize..5) {
        let inst = common::load_instance("mirror8.json");
        let alg = Algorithm::ALL[alg_idx];
        let scenario = if alg == Algorithm::BanditBlockhedge { "stoch-context-seq-follower" } else { "fully-stochastic" };
        let a = run_seed(&inst, scenario, alg, &LearnerParams::default(), 80, seed).unwrap();
        let b = run_seed(&inst, scenario, alg, &LearnerParams::default(), 80, seed).unwrap();
        prop_assert_eq!(a.records, b.records);
        prop_assert_eq!(a.types, b.types);
    }
}
