//! Online leaders behind a single contract: see the context, commit to a
//! mixed strategy, receive feedback.
//!
//! | name                | feedback | followers  | contexts    |
//! |---------------------|----------|------------|-------------|
//! | `greedy-typefreq`   | type     | stochastic | adversarial |
//! | `greedy-actionfreq` | type     | stochastic | adversarial |
//! | `hedge`             | type     | adversarial| stochastic  |
//! | `bandit-greedy`     | action   | stochastic | adversarial |
//! | `bandit-blockhedge` | action   | adversarial| stochastic  |

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use rand::RngCore;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::game::{Context, FollowerAction, GameInstance, MixedStrategy};
use crate::geometry::default_delta;
use crate::par::Exec;

mod bandit;
mod full_hedge;
mod greedy;
mod hedge;
mod menu;

pub use bandit::{
    block_loss_estimates, default_blocks, default_explore_rounds, BanditGreedy, BlockHedge, BlockPlan, BlockSchedule,
    SpannerEstimator,
};
pub use full_hedge::HedgeLearner;
pub use greedy::{Estimator, FollowerEstimate, Greedy};
pub use hedge::{binomial, default_eta, HedgeState, WeightGrid};
pub use menu::{Menu, MenuCache, PolicyClass, PolicyEvaluator};

/// What the leader learns after a round.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Feedback {
    /// The follower's type.
    FullInfo(usize),
    /// Only the follower's action.
    Bandit(FollowerAction),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum FeedbackMode {
    FullInfo,
    Bandit,
}

pub trait Learner: Send {
    fn name(&self) -> &str;

    fn feedback_mode(&self) -> FeedbackMode;

    /// Commitment for round `t` (0-based) under context `z`.
    fn act(&mut self, t: usize, z: &Context, rng: &mut dyn RngCore) -> Result<MixedStrategy>;

    /// Feedback for the round just played; called exactly once after each
    /// `act`.
    fn observe(&mut self, t: usize, z: &Context, x: &MixedStrategy, feedback: Feedback) -> Result<()>;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Algorithm {
    GreedyTypefreq,
    GreedyActionfreq,
    Hedge,
    BanditGreedy,
    BanditBlockhedge,
}

impl Algorithm {
    pub const ALL: [Algorithm; 5] = [
        Algorithm::GreedyTypefreq,
        Algorithm::GreedyActionfreq,
        Algorithm::Hedge,
        Algorithm::BanditGreedy,
        Algorithm::BanditBlockhedge,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Algorithm::GreedyTypefreq => "greedy-typefreq",
            Algorithm::GreedyActionfreq => "greedy-actionfreq",
            Algorithm::Hedge => "hedge",
            Algorithm::BanditGreedy => "bandit-greedy",
            Algorithm::BanditBlockhedge => "bandit-blockhedge",
        }
    }

    pub fn feedback_mode(self) -> FeedbackMode {
        match self {
            Algorithm::BanditGreedy | Algorithm::BanditBlockhedge => FeedbackMode::Bandit,
            _ => FeedbackMode::FullInfo,
        }
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Algorithm::ALL.into_iter().find(|a| a.as_str() == s).ok_or_else(|| {
            let names: Vec<&str> = Algorithm::ALL.iter().map(|a| a.as_str()).collect();
            Error::config(
                "alg",
                format!("unknown algorithm `{s}` (expected one of {})", names.join(", ")),
            )
        })
    }
}

/// Optional hyperparameter overrides; unset values take the defaults
/// derived from the horizon.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LearnerParams {
    #[serde(default)]
    pub delta: Option<f64>,
    #[serde(default)]
    pub eta: Option<f64>,
    /// Weight-grid resolution.
    #[serde(default, rename = "M")]
    pub m: Option<usize>,
    /// Exploration rounds per spanner element.
    #[serde(default, rename = "N")]
    pub n: Option<usize>,
    /// Number of blocks.
    #[serde(default, rename = "Z")]
    pub z: Option<usize>,
}

impl LearnerParams {
    pub fn delta_for(&self, horizon: usize) -> f64 {
        self.delta.unwrap_or_else(|| default_delta(horizon))
    }

    pub fn grid_resolution(&self, horizon: usize) -> usize {
        self.m.unwrap_or_else(|| horizon.clamp(1, 40))
    }

    pub fn validate(&self) -> Result<()> {
        if let Some(d) = self.delta {
            if !(d > 0.0 && d.is_finite()) {
                return Err(Error::config("delta", format!("must be > 0 (got {d})")));
            }
        }
        if let Some(e) = self.eta {
            if !(e > 0.0 && e.is_finite()) {
                return Err(Error::config("eta", format!("must be > 0 (got {e})")));
            }
        }
        for (field, v) in [("M", self.m), ("N", self.n), ("Z", self.z)] {
            if v == Some(0) {
                return Err(Error::config(field, "must be >= 1"));
            }
        }
        Ok(())
    }
}

/// Builds a fresh learner for one run of `horizon` rounds.
pub fn build_learner(
    alg: Algorithm,
    inst: Arc<GameInstance>,
    params: &LearnerParams,
    horizon: usize,
    exec: Exec,
) -> Result<Box<dyn Learner>> {
    params.validate()?;
    if horizon == 0 {
        return Err(Error::config("T", "horizon must be >= 1"));
    }
    Ok(match alg {
        Algorithm::GreedyTypefreq => Box::new(Greedy::new(inst, Estimator::TypeFreq, params.delta_for(horizon), exec)),
        Algorithm::GreedyActionfreq => Box::new(Greedy::new(
            inst,
            Estimator::ActionFreq,
            params.delta_for(horizon),
            exec,
        )),
        Algorithm::Hedge => Box::new(HedgeLearner::new(inst, params, horizon, exec)?),
        Algorithm::BanditGreedy => Box::new(BanditGreedy::new(inst, params, horizon)?),
        Algorithm::BanditBlockhedge => Box::new(BlockHedge::new(inst, params, horizon)?),
    })
}
