use std::sync::Arc;

use rand::seq::index;
use rand::{Rng, RngCore};

use super::hedge::{HedgeState, WeightGrid};
use super::menu::{Menu, MenuCache, PolicyClass, PolicyEvaluator};
use super::{Feedback, FeedbackMode, Learner, LearnerParams};
use crate::error::{Error, Result};
use crate::game::{Context, GameInstance, MixedStrategy};
use crate::geometry::{
    approx_extreme_points, barycentric_spanner, indicator_set, ExtremePoint, IndicatorVector, Spanner,
};
use crate::par::Exec;

/// Spanner of the indicator set together with the coefficients expressing
/// every indicator the menu can produce.
///
/// Follower utilities must ignore the context, so the regions, and with them
/// the menu points, are the same under every context; only the leader's
/// utilities vary.
#[derive(Debug, Clone)]
pub struct SpannerEstimator {
    pub points: Arc<Vec<ExtremePoint>>,
    pub spanner: Spanner,
    /// `coef[j][a]` expresses `1{sigma_j = a}` in the spanner basis.
    pub coef: Vec<Vec<Vec<f64>>>,
    num_types: usize,
}

impl SpannerEstimator {
    pub fn new(inst: &GameInstance, delta: f64) -> Result<Self> {
        inst.check_followers_context_free()?;
        let z = inst.context_space.reference_context();
        let menu = approx_extreme_points(inst, &z, delta, Exec::Sequential)?;
        let w = indicator_set(inst, &menu)?;
        let spanner = barycentric_spanner(&w);
        let coef = menu
            .points
            .iter()
            .map(|p| {
                (0..inst.follower_actions)
                    .map(|a| {
                        spanner.coefficients(&IndicatorVector::of(&p.sigma.0, crate::game::FollowerAction(a)).as_f64())
                    })
                    .collect()
            })
            .collect();
        Ok(SpannerEstimator {
            points: Arc::new(menu.points),
            spanner,
            coef,
            num_types: inst.num_types(),
        })
    }

    pub fn rank(&self) -> usize {
        self.spanner.rank()
    }

    pub fn realizer(&self, i: usize) -> (&MixedStrategy, usize) {
        let e = &self.spanner.elements[i];
        (&e.realizer_x, e.realizer_action.0)
    }

    /// `p_hat(1{sigma_j = a}) = sum_i lambda_i p_hat(b_i)`.
    pub fn indicator_estimate(&self, j: usize, a: usize, p_b: &[f64]) -> f64 {
        self.coef[j][a].iter().zip(p_b).map(|(l, p)| l * p).sum()
    }

    /// Estimates for every menu point and follower action.
    pub fn estimates(&self, p_b: &[f64]) -> Vec<Vec<f64>> {
        (0..self.coef.len())
            .map(|j| {
                (0..self.coef[j].len())
                    .map(|a| self.indicator_estimate(j, a, p_b))
                    .collect()
            })
            .collect()
    }

    pub fn num_types(&self) -> usize {
        self.num_types
    }
}

/// `ceil((A_f^2 T^2 ln T / K)^(1/3))` clamped to `[1, floor(T / r)]`.
pub fn default_explore_rounds(horizon: usize, num_types: usize, follower_actions: usize, rank: usize) -> usize {
    let t = horizon as f64;
    let af = follower_actions as f64;
    let raw = (af * af * t * t * t.ln() / num_types as f64).cbrt().ceil();
    let cap = (horizon / rank.max(1)).max(1);
    (raw.max(1.0) as usize).min(cap)
}

/// `ceil((T / (A_f ln T))^(1/3) * T^(1/3))`, clamped so every block holds
/// at least `r + 1` rounds.
pub fn default_blocks(horizon: usize, follower_actions: usize, rank: usize) -> usize {
    let t = horizon as f64;
    let raw = ((t / (follower_actions as f64 * t.ln().max(1e-12))).cbrt() * t.cbrt()).ceil();
    let cap = (horizon / (rank + 1)).max(1);
    (raw.max(1.0) as usize).min(cap)
}

/// Explore-then-exploit leader for stochastic followers and bandit feedback.
///
/// Plays each spanner realizer for `N` rounds and records how often the
/// matching follower action occurs, then combines those frequencies with
/// the spanner coefficients to score every menu point.
#[derive(Debug, Clone)]
pub struct BanditGreedy {
    est: SpannerEstimator,
    menus: MenuCache,
    explore_rounds: usize,
    hits: Vec<u64>,
    indicator: Option<Vec<Vec<f64>>>,
}

impl BanditGreedy {
    pub fn new(inst: Arc<GameInstance>, params: &LearnerParams, horizon: usize) -> Result<Self> {
        let delta = params.delta_for(horizon);
        let est = SpannerEstimator::new(&inst, delta)?;
        let r = est.rank();
        let n = params
            .n
            .unwrap_or_else(|| default_explore_rounds(horizon, inst.num_types(), inst.follower_actions, r));
        if n.checked_mul(r).is_none_or(|e| e > horizon) {
            return Err(Error::config(
                "N",
                format!("{n} exploration rounds for each of {r} spanner elements exceed T = {horizon}"),
            ));
        }
        let menus = MenuCache::with_fixed_points(inst, delta, est.points.clone());
        Ok(BanditGreedy {
            hits: vec![0; r],
            est,
            menus,
            explore_rounds: n,
            indicator: None,
        })
    }

    pub fn explore_rounds(&self) -> usize {
        self.explore_rounds
    }

    pub fn estimator(&self) -> &SpannerEstimator {
        &self.est
    }

    pub fn exploration_len(&self) -> usize {
        self.explore_rounds * self.est.rank()
    }

    /// `p_hat(b_i)` for each spanner element, from the hits recorded so far.
    pub fn spanner_estimates(&self) -> Vec<f64> {
        self.hits
            .iter()
            .map(|h| *h as f64 / self.explore_rounds as f64)
            .collect()
    }

    /// Closes the exploration phase and fixes the indicator estimates.
    /// Faults if any estimate leaves `[-K, K + 1]`.
    pub fn finish_exploration(&mut self) -> Result<&[Vec<f64>]> {
        if self.indicator.is_none() {
            let k = self.est.num_types() as f64;
            let table = self.est.estimates(&self.spanner_estimates());
            if let Some(&bad) = table
                .iter()
                .flatten()
                .find(|v| !(-k - 1e-9..=k + 1.0 + 1e-9).contains(*v))
            {
                return Err(Error::LossOutOfRange {
                    value: bad,
                    lo: -k,
                    hi: k + 1.0,
                });
            }
            self.indicator = Some(table);
        }
        Ok(self.indicator.as_deref().expect("just set"))
    }
}

impl Learner for BanditGreedy {
    fn name(&self) -> &str {
        "bandit-greedy"
    }

    fn feedback_mode(&self) -> FeedbackMode {
        FeedbackMode::Bandit
    }

    fn act(&mut self, t: usize, z: &Context, _rng: &mut dyn RngCore) -> Result<MixedStrategy> {
        if t < self.exploration_len() {
            return Ok(self.est.realizer(t / self.explore_rounds).0.clone());
        }
        self.finish_exploration()?;
        let menu = self.menus.get(z)?;
        let table = self.indicator.as_ref().expect("exploration finished");
        let j = menu.argmax_by(|j| table[j].iter().zip(&menu.leader[j]).map(|(p, u)| p * u).sum());
        Ok(menu.strategy(j).clone())
    }

    fn observe(&mut self, t: usize, _z: &Context, _x: &MixedStrategy, feedback: Feedback) -> Result<()> {
        let Feedback::Bandit(a) = feedback else {
            return Err(Error::config("alg", "bandit-greedy expects action feedback"));
        };
        if t < self.exploration_len() {
            let i = t / self.explore_rounds;
            if a.0 == self.est.realizer(i).1 {
                self.hits[i] += 1;
            }
        }
        Ok(())
    }
}

/// Partition of the horizon into `Z` blocks of `floor(T / Z)` rounds; the
/// remaining rounds follow the last block.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BlockSchedule {
    pub blocks: usize,
    pub block_size: usize,
    pub horizon: usize,
}

/// Slot assignment inside one block.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BlockPlan {
    /// `explore[s] = Some(i)` if slot `s` plays spanner element `i`.
    pub explore: Vec<Option<usize>>,
    pub context_slot: usize,
}

impl BlockSchedule {
    pub fn new(horizon: usize, blocks: usize, rank: usize) -> Result<Self> {
        if blocks == 0 || blocks > horizon {
            return Err(Error::config(
                "Z",
                format!("need 1 <= Z <= T (got Z = {blocks}, T = {horizon})"),
            ));
        }
        let block_size = horizon / blocks;
        if block_size < rank + 1 {
            return Err(Error::config(
                "Z",
                format!("block size {block_size} is below spanner size + 1 = {}", rank + 1),
            ));
        }
        Ok(BlockSchedule {
            blocks,
            block_size,
            horizon,
        })
    }

    /// Rounds covered by blocks.
    pub fn covered(&self) -> usize {
        self.blocks * self.block_size
    }

    /// Explore slots as a uniformly random injection of the `r` spanner
    /// elements; the context slot is uniform over the whole block.
    pub fn plan(&self, rank: usize, rng: &mut dyn RngCore) -> BlockPlan {
        let mut explore = vec![None; self.block_size];
        for (i, s) in index::sample(rng, self.block_size, rank).into_iter().enumerate() {
            explore[s] = Some(i);
        }
        BlockPlan {
            explore,
            context_slot: rng.random_range(0..self.block_size),
        }
    }
}

/// Block loss estimate for every policy:
/// `-sum_a p_hat(1{sigma = a}) u(z_tau, pi(z_tau), a)` with the indicator
/// estimates `table[j][a]` built from the block's one-shot spanner values.
pub fn block_loss_estimates(menu: &Menu, choices: &[usize], table: &[Vec<f64>]) -> Vec<f64> {
    choices
        .iter()
        .map(|&j| -table[j].iter().zip(&menu.leader[j]).map(|(p, u)| p * u).sum::<f64>())
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Pending {
    Explore(usize),
    Exploit,
}

/// Block Hedge leader for stochastic contexts and bandit feedback.
#[derive(Debug, Clone)]
pub struct BlockHedge {
    est: SpannerEstimator,
    policies: PolicyEvaluator,
    hedge: HedgeState,
    schedule: BlockSchedule,
    plan: Option<BlockPlan>,
    block_hits: Vec<f64>,
    block_context: Option<Context>,
    pending: Option<Pending>,
    updates: usize,
}

impl BlockHedge {
    pub fn new(inst: Arc<GameInstance>, params: &LearnerParams, horizon: usize) -> Result<Self> {
        let delta = params.delta_for(horizon);
        let est = SpannerEstimator::new(&inst, delta)?;
        let r = est.rank();
        let z = params
            .z
            .unwrap_or_else(|| default_blocks(horizon, inst.follower_actions, r));
        let schedule = BlockSchedule::new(horizon, z, r)?;
        let class = PolicyClass::new(WeightGrid::new(inst.num_types(), params.grid_resolution(horizon))?);
        let scale = (inst.num_types() * inst.follower_actions) as f64;
        let eta = params
            .eta
            .unwrap_or_else(|| ((class.len().max(2) as f64).ln() / z as f64).sqrt() / scale);
        let bound = scale * est.spanner.coefficient_bound();
        let hedge = HedgeState::new(class.len(), eta, (-bound, bound))?;
        let menus = MenuCache::with_fixed_points(inst, delta, est.points.clone());
        Ok(BlockHedge {
            block_hits: vec![0.0; r],
            est,
            policies: PolicyEvaluator::new(menus, class),
            hedge,
            schedule,
            plan: None,
            block_context: None,
            pending: None,
            updates: 0,
        })
    }

    pub fn schedule(&self) -> BlockSchedule {
        self.schedule
    }

    pub fn hedge(&self) -> &HedgeState {
        &self.hedge
    }

    /// Number of Hedge updates so far (one per completed block).
    pub fn updates(&self) -> usize {
        self.updates
    }

    fn exploit(&mut self, z: &Context, rng: &mut dyn RngCore) -> Result<MixedStrategy> {
        let policy = self.hedge.sample(rng);
        let (menu, choices) = self.policies.evaluate(z)?;
        self.pending = Some(Pending::Exploit);
        Ok(menu.strategy(choices[policy]).clone())
    }

    fn end_block(&mut self) -> Result<()> {
        let z = self.block_context.take().expect("context slot lies inside the block");
        let (menu, choices) = self.policies.evaluate(&z)?;
        let table = self.est.estimates(&self.block_hits);
        let losses = block_loss_estimates(&menu, &choices, &table);
        self.hedge.update(&losses)?;
        self.updates += 1;
        Ok(())
    }
}

impl Learner for BlockHedge {
    fn name(&self) -> &str {
        "bandit-blockhedge"
    }

    fn feedback_mode(&self) -> FeedbackMode {
        FeedbackMode::Bandit
    }

    fn act(&mut self, t: usize, z: &Context, rng: &mut dyn RngCore) -> Result<MixedStrategy> {
        if t >= self.schedule.covered() {
            return self.exploit(z, rng);
        }
        let slot = t % self.schedule.block_size;
        if slot == 0 {
            self.plan = Some(self.schedule.plan(self.est.rank(), rng));
            self.block_hits.iter_mut().for_each(|h| *h = 0.0);
        }
        let plan = self.plan.as_ref().expect("plan drawn at slot 0");
        if slot == plan.context_slot {
            self.block_context = Some(z.clone());
        }
        match plan.explore[slot] {
            Some(i) => {
                self.pending = Some(Pending::Explore(i));
                Ok(self.est.realizer(i).0.clone())
            }
            None => self.exploit(z, rng),
        }
    }

    fn observe(&mut self, t: usize, _z: &Context, _x: &MixedStrategy, feedback: Feedback) -> Result<()> {
        let Feedback::Bandit(a) = feedback else {
            return Err(Error::config("alg", "bandit-blockhedge expects action feedback"));
        };
        if let Some(Pending::Explore(i)) = self.pending.take() {
            if a.0 == self.est.realizer(i).1 {
                self.block_hits[i] = 1.0;
            }
        }
        if t < self.schedule.covered() && t % self.schedule.block_size == self.schedule.block_size - 1 {
            self.end_block()?;
        }
        Ok(())
    }
}
