use std::sync::Arc;

use rand::RngCore;

use super::hedge::{default_eta, HedgeState, WeightGrid};
use super::menu::{MenuCache, PolicyClass, PolicyEvaluator};
use super::{Feedback, FeedbackMode, Learner, LearnerParams};
use crate::error::{Error, Result};
use crate::game::{Context, GameInstance, MixedStrategy};
use crate::par::{self, Exec};

/// Hedge over the weight-grid policy class with full feedback: every
/// policy's counterfactual loss `-u(z, pi(z), b_f(z, pi(z)))` is computable
/// once the type is revealed.
#[derive(Debug)]
pub struct HedgeLearner {
    policies: PolicyEvaluator,
    hedge: HedgeState,
    exec: Exec,
}

impl HedgeLearner {
    pub fn new(inst: Arc<GameInstance>, params: &LearnerParams, horizon: usize, exec: Exec) -> Result<Self> {
        let grid = WeightGrid::new(inst.num_types(), params.grid_resolution(horizon))?;
        let class = PolicyClass::new(grid);
        let eta = params.eta.unwrap_or_else(|| default_eta(class.len(), horizon));
        let hedge = HedgeState::new(class.len(), eta, (-1.0, 0.0))?;
        let menus = MenuCache::new(inst, params.delta_for(horizon), exec);
        Ok(HedgeLearner {
            policies: PolicyEvaluator::new(menus, class),
            hedge,
            exec,
        })
    }

    pub fn hedge(&self) -> &HedgeState {
        &self.hedge
    }

    pub fn policy_class(&self) -> &PolicyClass {
        &self.policies.class
    }

    /// Loss of every policy for a round with context `z` and follower type
    /// `type_idx`.
    pub fn losses(&mut self, z: &Context, type_idx: usize) -> Result<Vec<f64>> {
        let (menu, choices) = self.policies.evaluate(z)?;
        Ok(par::map_collect(self.exec, &choices, |&j| {
            -menu.utility_vs_type(j, type_idx)
        }))
    }
}

impl Learner for HedgeLearner {
    fn name(&self) -> &str {
        "hedge"
    }

    fn feedback_mode(&self) -> FeedbackMode {
        FeedbackMode::FullInfo
    }

    fn act(&mut self, _t: usize, z: &Context, rng: &mut dyn RngCore) -> Result<MixedStrategy> {
        let policy = self.hedge.sample(rng);
        let (menu, choices) = self.policies.evaluate(z)?;
        Ok(menu.strategy(choices[policy]).clone())
    }

    fn observe(&mut self, _t: usize, z: &Context, _x: &MixedStrategy, feedback: Feedback) -> Result<()> {
        let Feedback::FullInfo(i) = feedback else {
            return Err(Error::config("alg", "hedge needs the follower's type"));
        };
        let losses = self.losses(z, i)?;
        self.hedge.update(&losses)
    }
}
