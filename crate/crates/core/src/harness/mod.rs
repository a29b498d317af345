//! Experiment plumbing: play a learner against an environment, score it
//! against the best policy in hindsight, aggregate over seeds, write files.

use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::env::{Environment, FollowerAudit, FollowerView};
use crate::error::{Error, Result};
use crate::game::{Context, ContextSpace, GameInstance, RoundRecord};
use crate::learners::{build_learner, Algorithm, Feedback, FeedbackMode, LearnerParams};
use crate::par::Exec;

mod benchmark;
mod output;
mod report;

pub use benchmark::{benchmark_policy, Benchmark, BenchmarkEntry, BENCHMARK_SLACK};
pub use output::{
    run_experiment, run_sweep, write_aggregate, write_aggregate_csv, write_transcript_csv, ExperimentConfig,
    ExperimentOutput, SweepConfig, SweepOutput, SweepPoint,
};
pub use report::{aggregate, fit_regret_exponent, regret_report, AggregateCurve, RegretReport, SlopeFit};

/// One seed's full play history.
#[derive(Debug, Clone)]
pub struct Transcript {
    pub instance: String,
    pub scenario: String,
    pub alg: Algorithm,
    pub seed: u64,
    pub records: Vec<RoundRecord>,
    /// Realized follower types, kept even when the learner never saw them.
    pub types: Vec<usize>,
    pub audit: Vec<FollowerAudit>,
    /// For the thresholding scenario: whether some threshold is consistent
    /// with every label the adversary committed to.
    pub threshold_consistent: Option<bool>,
}

impl Transcript {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn contexts(&self) -> Vec<Context> {
        self.records.iter().map(|r| r.context.clone()).collect()
    }
}

/// Independent random streams of one seed.
#[derive(Debug, Clone)]
pub struct SeedStreams {
    pub env: ChaCha8Rng,
    pub learner: ChaCha8Rng,
    pub play: ChaCha8Rng,
}

impl SeedStreams {
    pub fn new(seed: u64) -> Self {
        let stream = |s| {
            let mut r = ChaCha8Rng::seed_from_u64(seed);
            r.set_stream(s);
            r
        };
        SeedStreams {
            env: stream(0),
            learner: stream(1),
            play: stream(2),
        }
    }
}

/// Rejects learner/scenario pairs outside the learner's model.
pub fn check_compatible(alg: Algorithm, env: &Environment) -> Result<()> {
    if alg.feedback_mode() == FeedbackMode::Bandit && env.followers.is_adaptive() {
        return Err(Error::config(
            "scenario",
            format!(
                "{alg} needs a non-adaptive follower sequence, `{}` is adaptive",
                env.scenario
            ),
        ));
    }
    if alg == Algorithm::BanditBlockhedge && !env.contexts.is_stochastic() {
        return Err(Error::config(
            "scenario",
            format!("{alg} needs stochastic contexts, `{}` has none", env.scenario),
        ));
    }
    Ok(())
}

/// Plays one seed of `alg` on `scenario` for `horizon` rounds.
pub fn run_seed(
    inst: &Arc<GameInstance>,
    scenario: &str,
    alg: Algorithm,
    params: &LearnerParams,
    horizon: usize,
    seed: u64,
) -> Result<Transcript> {
    let mut env = Environment::from_scenario(scenario, inst, horizon)?;
    env.set_learner_id(alg.as_str());
    check_compatible(alg, &env)?;
    let mut learner = build_learner(alg, inst.clone(), params, horizon, Exec::Sequential)?;
    let mut rng = SeedStreams::new(seed);
    let mut records: Vec<RoundRecord> = Vec::with_capacity(horizon);
    let mut types: Vec<usize> = Vec::with_capacity(horizon);
    for t in 0..horizon {
        let z = env.next_context(t, &records, &mut rng.env)?;
        let x = learner.act(t, &z, &mut rng.learner)?;
        let view = FollowerView {
            past: &records,
            past_types: &types,
            commitment: env.observes_commitment().then_some(&x),
        };
        let f = env.next_follower(t, view, &mut rng.env)?;
        let mut rec = inst.play_round(t, &z, &x, f, &mut rng.play)?;
        let feedback = match learner.feedback_mode() {
            FeedbackMode::FullInfo => Feedback::FullInfo(f),
            FeedbackMode::Bandit => {
                rec.follower_type = None;
                Feedback::Bandit(rec.follower_action)
            }
        };
        learner.observe(t, &z, &x, feedback)?;
        records.push(rec);
        types.push(f);
    }
    Ok(Transcript {
        instance: inst.name.clone(),
        scenario: scenario.to_string(),
        alg,
        seed,
        records,
        types,
        threshold_consistent: env.threshold_state().map(|s| s.consistent_threshold().is_some()),
        audit: env.audit_log().to_vec(),
    })
}

/// Looks up a context by label in a finite space, or parses a
/// comma-separated vector for a box space.
pub fn resolve_context(inst: &GameInstance, spec: &str) -> Result<Context> {
    match &inst.context_space {
        ContextSpace::Finite { contexts } => contexts
            .iter()
            .find(|c| c.label.as_deref() == Some(spec))
            .cloned()
            .ok_or_else(|| {
                let labels: Vec<&str> = contexts.iter().filter_map(|c| c.label.as_deref()).collect();
                Error::config(
                    "context",
                    format!("no context labeled `{spec}` (have {})", labels.join(", ")),
                )
            }),
        ContextSpace::Box { dim, .. } => {
            let v = spec
                .split(',')
                .map(|s| s.trim().parse::<f64>())
                .collect::<std::result::Result<Vec<_>, _>>()
                .map_err(|e| Error::config("context", format!("expected {dim} comma-separated numbers: {e}")))?;
            if v.len() != *dim {
                return Err(Error::config(
                    "context",
                    format!("expected {dim} coordinates, got {}", v.len()),
                ));
            }
            Context::new(v)
        }
    }
}
