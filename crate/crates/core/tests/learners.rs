//! Learner behavior on a two-type "matching" game where every quantity can
//! be worked out by hand: type 0 always plays action 0, type 1 always plays
//! action 1, and the leader earns `x[a]` when the follower plays `a`.

use std::sync::Arc;

use approx::assert_abs_diff_eq;
use ctxstack::harness::{aggregate, benchmark_policy, fit_regret_exponent, RegretReport};
use ctxstack::learners::{
    block_loss_estimates, Algorithm, BanditGreedy, BlockHedge, Estimator, Feedback, FollowerEstimate, Greedy,
    HedgeLearner, Learner, LearnerParams, Menu, PolicyClass, WeightGrid,
};
use ctxstack::{Context, Exec, FollowerAction, GameInstance};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn matching(types: usize) -> Arc<GameInstance> {
    let all = [
        r#"{"name": "likes0", "utility": {"kind": "tabular", "tables": {"c0": [[1, 0], [1, 0]]}}}"#,
        r#"{"name": "likes1", "utility": {"kind": "tabular", "tables": {"c0": [[0, 1], [0, 1]]}}}"#,
    ];
    let json = format!(
        r#"{{
            "name": "matching",
            "leader_actions": 2,
            "follower_actions": 2,
            "types": [{}],
            "leader_utility": {{"kind": "tabular", "tables": {{"c0": [[1, 0], [0, 1]]}}}},
            "context_space": {{"kind": "finite", "contexts": [{{"label": "c0"}}]}}
        }}"#,
        all[..types].join(",")
    );
    Arc::new(GameInstance::from_json(&json).unwrap())
}

fn c0() -> Context {
    Context::labeled("c0", vec![0.0]).unwrap()
}

fn menu(inst: &GameInstance) -> Menu {
    Menu::build(inst, &c0(), 1e-3, Exec::Sequential).unwrap()
}

fn index_of(menu: &Menu, x: &[f64]) -> usize {
    (0..menu.len())
        .find(|&j| menu.strategy(j).probs() == x)
        .unwrap_or_else(|| panic!("{x:?} not in the menu"))
}

#[test]
fn menu_is_the_two_vertices() {
    let inst = matching(2);
    let m = menu(&inst);
    assert_eq!(m.len(), 2);
    index_of(&m, &[1.0, 0.0]);
    index_of(&m, &[0.0, 1.0]);
}

#[test]
fn type_frequencies() {
    let mut est = FollowerEstimate::new(Estimator::TypeFreq, 2, 2);
    assert_eq!(est.type_probs(), vec![0.5, 0.5]);
    for f in [0, 0, 1] {
        est.record(f);
    }
    let p = est.type_probs();
    assert_abs_diff_eq!(p[0], 2.0 / 3.0, epsilon = 1e-15);
    assert_abs_diff_eq!(p[1], 1.0 / 3.0, epsilon = 1e-15);
}

#[test]
fn greedy_follows_the_majority_type() {
    let inst = matching(2);
    let mut g = Greedy::new(inst.clone(), Estimator::TypeFreq, 1e-3, Exec::Sequential);
    for (t, f) in [0, 0, 1].into_iter().enumerate() {
        let z = c0();
        let x = g.act(t, &z, &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
        g.observe(t, &z, &x, Feedback::FullInfo(f)).unwrap();
    }
    let (m, j) = g.choose(&c0()).unwrap();
    assert_eq!(m.strategy(j).probs(), &[1.0, 0.0]);
    assert_abs_diff_eq!(g.estimate().expected_utility(&m, j), 2.0 / 3.0, epsilon = 1e-15);
}

#[test]
fn action_frequencies_replay_the_types() {
    let inst = matching(2);
    let m = menu(&inst);
    let mut est = FollowerEstimate::new(Estimator::ActionFreq, 2, 2);
    let j = index_of(&m, &[0.0, 1.0]);
    assert_eq!(est.action_probs(&m.points[j].sigma), vec![0.5, 0.5]);
    est.record(1);
    est.record(1);
    assert_eq!(est.action_probs(&m.points[j].sigma), vec![0.0, 1.0]);
    assert_eq!(est.expected_utility(&m, j), 1.0);
    assert_eq!(est.expected_utility(&m, index_of(&m, &[1.0, 0.0])), 0.0);
}

#[test]
fn grid_for_two_types_and_resolution_two() {
    let g = WeightGrid::new(2, 2).unwrap();
    assert_eq!(g.numerators, vec![vec![0, 2], vec![1, 1], vec![2, 0]]);
    assert_eq!(g.all_weights(), vec![vec![0.0, 1.0], vec![0.5, 0.5], vec![1.0, 0.0]]);
}

#[test]
fn policies_best_respond_to_their_weights() {
    let inst = matching(2);
    let m = menu(&inst);
    let class = PolicyClass::new(WeightGrid::new(2, 2).unwrap());
    let choices = class.choices(&m);
    assert_eq!(m.strategy(choices[0]).probs(), &[0.0, 1.0]);
    assert_eq!(m.strategy(choices[2]).probs(), &[1.0, 0.0]);
    // an even split ties, and the earliest menu point wins
    assert_eq!(choices[1], 0);
}

#[test]
fn hedge_losses_are_negated_utilities() {
    let inst = matching(2);
    let params = LearnerParams {
        m: Some(2),
        ..LearnerParams::default()
    };
    let mut h = HedgeLearner::new(inst.clone(), &params, 100, Exec::Sequential).unwrap();
    let m = menu(&inst);
    let tie = m.strategy(0).probs()[0];
    assert_eq!(h.losses(&c0(), 0).unwrap(), vec![-0.0, -tie, -1.0]);
    assert_eq!(h.losses(&c0(), 1).unwrap(), vec![-1.0, -(1.0 - tie), -0.0]);
    assert_abs_diff_eq!(h.hedge().eta(), (3f64.ln() / 100.0).sqrt(), epsilon = 1e-15);
}

#[test]
fn block_loss_with_one_type_is_exact() {
    let inst = matching(1);
    let m = menu(&inst);
    assert_eq!(m.len(), 2, "one region, the whole simplex, with both vertices");
    let class = PolicyClass::new(WeightGrid::new(1, 4).unwrap());
    let choices = class.choices(&m);
    // the follower always plays 0, so every point's indicator is (1, 0)
    let table = vec![vec![1.0, 0.0]; m.len()];
    let losses = block_loss_estimates(&m, &choices, &table);
    assert!(losses.iter().all(|l| *l == -1.0), "{losses:?}");
}

#[test]
fn one_block_gives_one_update() {
    let inst = matching(2);
    let params = LearnerParams {
        z: Some(1),
        m: Some(2),
        ..LearnerParams::default()
    };
    let horizon = 9;
    let mut learner = BlockHedge::new(inst.clone(), &params, horizon).unwrap();
    assert_eq!(learner.schedule().block_size, horizon);
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for t in 0..horizon {
        assert_eq!(learner.updates(), 0);
        let x = learner.act(t, &c0(), &mut rng).unwrap();
        let a = inst.follower_best_response(t % 2, &c0(), &x).unwrap();
        learner.observe(t, &c0(), &x, Feedback::Bandit(a)).unwrap();
    }
    assert_eq!(learner.updates(), 1);
    assert!(learner.hedge().cumulative_loss().iter().any(|l| *l != 0.0));
}

#[test]
fn bandit_greedy_with_a_deterministic_follower() {
    let inst = matching(2);
    let params = LearnerParams {
        n: Some(5),
        ..LearnerParams::default()
    };
    let mut learner = BanditGreedy::new(inst.clone(), &params, 100).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut last = None;
    for t in 0..100 {
        let x = learner.act(t, &c0(), &mut rng).unwrap();
        let a: FollowerAction = inst.follower_best_response(1, &c0(), &x).unwrap();
        learner.observe(t, &c0(), &x, Feedback::Bandit(a)).unwrap();
        last = Some(x);
    }
    for p in learner.spanner_estimates() {
        assert!(
            p == 0.0 || p == 1.0,
            "deterministic follower gives exact frequencies, got {p}"
        );
    }
    assert_eq!(last.unwrap().probs(), &[0.0, 1.0]);
}

#[test]
fn bandit_learners_reject_context_dependent_followers() {
    let json = r#"{
        "leader_actions": 2,
        "follower_actions": 2,
        "types": [{"name": "t", "utility": {"kind": "tabular", "tables": {
            "a": [[1, 0], [0, 1]], "b": [[0, 1], [1, 0]]}}}],
        "leader_utility": {"kind": "tabular", "tables": {"a": [[1, 0], [0, 1]], "b": [[1, 0], [0, 1]]}},
        "context_space": {"kind": "finite", "contexts": [{"label": "a"}, {"label": "b"}]}
    }"#;
    let inst = Arc::new(GameInstance::from_json(json).unwrap());
    for alg in [Algorithm::BanditGreedy, Algorithm::BanditBlockhedge] {
        let err =
            ctxstack::learners::build_learner(alg, inst.clone(), &LearnerParams::default(), 100, Exec::Sequential)
                .err()
                .expect("rejected");
        assert!(err.to_string().contains("differ across contexts"), "{err}");
    }
}

#[test]
fn benchmark_of_a_single_round() {
    let inst = matching(2);
    let b = benchmark_policy(&inst, &[c0()], &[1], 1e-3, Exec::Sequential).unwrap();
    assert_eq!(b.per_round, vec![1.0]);
    assert_eq!(b.strategy_for(&c0()).unwrap().probs(), &[0.0, 1.0]);
}

#[test]
fn benchmark_picks_the_majority_in_hindsight() {
    let inst = matching(2);
    let types = [0, 1, 1, 0, 1];
    let b = benchmark_policy(&inst, &vec![c0(); 5], &types, 1e-3, Exec::Sequential).unwrap();
    assert_eq!(b.per_round, vec![0.0, 1.0, 1.0, 0.0, 1.0]);
    assert_eq!(b.total(), 3.0);
}

fn report(seed: u64, regret: Vec<f64>) -> RegretReport {
    RegretReport {
        alg: Algorithm::Hedge,
        seed,
        benchmark_utility: vec![0.0; regret.len()],
        learner_utility: vec![0.0; regret.len()],
        cumulative_regret: regret,
        benchmark_slack: 1.0,
    }
}

#[test]
fn aggregate_of_one_seed_has_zero_spread() {
    let a = aggregate(&[report(0, vec![1.0, 3.0])]).unwrap();
    assert_eq!(a.mean_regret, vec![1.0, 3.0]);
    assert_eq!(a.std_regret, vec![0.0, 0.0]);
    assert_eq!(a.mean_avg_regret, vec![1.0, 1.5]);
}

#[test]
fn aggregate_uses_the_sample_deviation() {
    let a = aggregate(&[report(0, vec![1.0]), report(1, vec![3.0])]).unwrap();
    assert_eq!(a.mean_regret, vec![2.0]);
    assert_abs_diff_eq!(a.std_regret[0], 2f64.sqrt(), epsilon = 1e-15);
    let err = aggregate(&[report(0, vec![1.0]), report(1, vec![1.0, 2.0])]).unwrap_err();
    assert!(err.to_string().contains("T"));
}

#[test]
fn slope_of_exact_power_laws() {
    let ts = [1000, 4000, 16000];
    for exponent in [0.5, 2.0 / 3.0] {
        let r: Vec<f64> = ts.iter().map(|t| 3.0 * (*t as f64).powf(exponent)).collect();
        let fit = fit_regret_exponent(&ts, &r).unwrap();
        assert_abs_diff_eq!(fit.slope, exponent, epsilon = 1e-12);
        assert_abs_diff_eq!(fit.intercept, 3f64.ln(), epsilon = 1e-9);
    }
    assert!(fit_regret_exponent(&[100, 200, 400], &[1.0, 2.0, 3.0]).is_err());
}
