use std::sync::Arc;

use rand::RngCore;

use super::menu::{Menu, MenuCache};
use super::{Feedback, FeedbackMode, Learner};
use crate::error::{Error, Result};
use crate::game::{Context, GameInstance, MixedStrategy};
use crate::geometry::BestResponseFunction;
use crate::par::Exec;

/// How the greedy leader estimates the follower distribution.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Estimator {
    /// Empirical type frequencies, uniform prior over types.
    TypeFreq,
    /// Per-(context, strategy) empirical frequencies of the follower's
    /// action, obtained by replaying the type history through the
    /// best-response function; uniform prior over actions.
    ActionFreq,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FollowerEstimate {
    pub estimator: Estimator,
    history: Vec<usize>,
    counts: Vec<u64>,
    follower_actions: usize,
}

impl FollowerEstimate {
    pub fn new(estimator: Estimator, num_types: usize, follower_actions: usize) -> Self {
        FollowerEstimate {
            estimator,
            history: Vec::new(),
            counts: vec![0; num_types],
            follower_actions,
        }
    }

    pub fn rounds(&self) -> usize {
        self.history.len()
    }

    pub fn history(&self) -> &[usize] {
        &self.history
    }

    pub fn record(&mut self, type_idx: usize) {
        self.history.push(type_idx);
        self.counts[type_idx] += 1;
    }

    /// Estimated type distribution; uniform before any observation.
    pub fn type_probs(&self) -> Vec<f64> {
        let k = self.counts.len();
        let t = self.rounds();
        if t == 0 {
            return vec![1.0 / k as f64; k];
        }
        self.counts.iter().map(|c| *c as f64 / t as f64).collect()
    }

    /// Estimated distribution of the follower's action when the leader plays
    /// a strategy with response function `sigma`. Uniform before any
    /// observation. Replays the history grouped by type, which yields the
    /// same counts as a round-by-round replay.
    pub fn action_probs(&self, sigma: &BestResponseFunction) -> Vec<f64> {
        let t = self.rounds();
        if t == 0 {
            return vec![1.0 / self.follower_actions as f64; self.follower_actions];
        }
        let mut hits = vec![0u64; self.follower_actions];
        for (i, c) in self.counts.iter().enumerate() {
            hits[sigma.action(i).0] += c;
        }
        hits.into_iter().map(|h| h as f64 / t as f64).collect()
    }

    /// `E_hat[u(z, x_j, b)]` for menu point `j`.
    pub fn expected_utility(&self, menu: &Menu, j: usize) -> f64 {
        match self.estimator {
            Estimator::TypeFreq => menu.weighted_value(j, &self.type_probs()),
            Estimator::ActionFreq => self
                .action_probs(&menu.points[j].sigma)
                .iter()
                .zip(&menu.leader[j])
                .map(|(p, u)| p * u)
                .sum(),
        }
    }
}

/// Greedy leader: plays the point of `E_z` with the highest estimated
/// utility under the current follower estimate.
#[derive(Debug)]
pub struct Greedy {
    name: &'static str,
    menus: MenuCache,
    estimate: FollowerEstimate,
}

impl Greedy {
    pub fn new(inst: Arc<GameInstance>, estimator: Estimator, delta: f64, exec: Exec) -> Self {
        let estimate = FollowerEstimate::new(estimator, inst.num_types(), inst.follower_actions);
        Greedy {
            name: match estimator {
                Estimator::TypeFreq => "greedy-typefreq",
                Estimator::ActionFreq => "greedy-actionfreq",
            },
            menus: MenuCache::new(inst, delta, exec),
            estimate,
        }
    }

    pub fn estimate(&self) -> &FollowerEstimate {
        &self.estimate
    }

    /// Index into `E_z` of the greedy choice.
    pub fn choose(&mut self, z: &Context) -> Result<(Arc<Menu>, usize)> {
        let menu = self.menus.get(z)?;
        let j = menu.argmax_by(|j| self.estimate.expected_utility(&menu, j));
        Ok((menu, j))
    }
}

impl Learner for Greedy {
    fn name(&self) -> &str {
        self.name
    }

    fn feedback_mode(&self) -> FeedbackMode {
        FeedbackMode::FullInfo
    }

    fn act(&mut self, _t: usize, z: &Context, _rng: &mut dyn RngCore) -> Result<MixedStrategy> {
        let (menu, j) = self.choose(z)?;
        Ok(menu.strategy(j).clone())
    }

    fn observe(&mut self, _t: usize, _z: &Context, _x: &MixedStrategy, feedback: Feedback) -> Result<()> {
        match feedback {
            Feedback::FullInfo(i) => {
                self.estimate.record(i);
                Ok(())
            }
            Feedback::Bandit(_) => Err(Error::config("alg", "greedy learners need the follower's type")),
        }
    }
}
