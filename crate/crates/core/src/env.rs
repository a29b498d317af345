//! Context and follower sequences under each threat model.
//!
//! An [`Environment`] pairs a context source with a follower source. The
//! follower source only ever sees a [`FollowerView`], which carries the
//! completed rounds (and so contexts `z_1..z_{t-1}`) but has no field for the
//! current context. Only the thresholding adversary additionally observes
//! the leader's commitment for the round.

use num::{BigInt, BigRational, ToPrimitive};
use rand::Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::game::{Context, ContextSpace, FollowerType, GameInstance, MixedStrategy, RoundRecord, UtilityModel};

pub const SCENARIOS: [&str; 5] = [
    "fully-stochastic",
    "stoch-follower-adv-context",
    "stoch-context-adv-follower",
    "stoch-context-seq-follower",
    "olt-lower-bound",
];

/// Number of contexts in the adversarial rotation.
pub const ROTATION_LEN: usize = 8;

#[derive(Debug, Clone)]
pub enum ContextSource {
    /// i.i.d. draws from a finite list.
    Stochastic { contexts: Vec<Context>, probs: Vec<f64> },
    /// i.i.d. uniform draws from a box.
    UniformBox { lo: Vec<f64>, hi: Vec<f64> },
    /// Fixed up front; `t`-th element at round `t`.
    Sequence(Vec<Context>),
    /// Fixed cyclic order.
    Rotation(Vec<Context>),
    /// Midpoints of the thresholding adversary's consistency interval.
    Threshold,
}

#[derive(Debug, Clone)]
pub enum FollowerSource {
    Stochastic(Vec<f64>),
    Sequence(Vec<usize>),
    /// Adaptive: plays the least frequent type so far (ties to the highest
    /// index), so a leader that fits the majority is punished next round.
    MajorityPunishing,
    /// Labels the round against the leader's commitment.
    Threshold,
}

impl ContextSource {
    pub fn is_stochastic(&self) -> bool {
        matches!(
            self,
            ContextSource::Stochastic { .. } | ContextSource::UniformBox { .. }
        )
    }
}

impl FollowerSource {
    pub fn is_stochastic(&self) -> bool {
        matches!(self, FollowerSource::Stochastic(_))
    }

    pub fn is_adaptive(&self) -> bool {
        matches!(self, FollowerSource::MajorityPunishing | FollowerSource::Threshold)
    }
}

/// What a follower source may condition on at round `t`.
#[derive(Debug, Clone, Copy)]
pub struct FollowerView<'a> {
    /// Completed rounds `1..t-1`.
    pub past: &'a [RoundRecord],
    /// Types chosen in rounds `1..t-1`.
    pub past_types: &'a [usize],
    /// The leader's commitment this round; only set for sources that
    /// observe it.
    pub commitment: Option<&'a MixedStrategy>,
}

/// One follower-callback invocation, for auditing what it was shown.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FollowerAudit {
    pub t: usize,
    pub visible_rounds: usize,
    pub saw_commitment: bool,
}

#[derive(Debug, Clone)]
pub struct Environment {
    pub scenario: String,
    pub contexts: ContextSource,
    pub followers: FollowerSource,
    num_types: usize,
    learner_id: String,
    olt: Option<OltState>,
    audit: Vec<FollowerAudit>,
}

impl Environment {
    pub fn new(
        scenario: impl Into<String>,
        num_types: usize,
        contexts: ContextSource,
        followers: FollowerSource,
    ) -> Result<Self> {
        if let FollowerSource::Stochastic(p) = &followers {
            if p.len() != num_types || (p.iter().sum::<f64>() - 1.0).abs() > 1e-9 || p.iter().any(|v| *v < 0.0) {
                return Err(Error::config(
                    "follower_probs",
                    "must be a distribution over the follower types",
                ));
            }
        }
        if let ContextSource::Stochastic { contexts, probs } = &contexts {
            if contexts.len() != probs.len() || (probs.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
                return Err(Error::config(
                    "context_probs",
                    "must be a distribution over the contexts",
                ));
            }
        }
        let threshold_ctx = matches!(contexts, ContextSource::Threshold);
        let threshold_f = matches!(followers, FollowerSource::Threshold);
        if threshold_ctx != threshold_f {
            return Err(Error::config(
                "scenario",
                "threshold contexts and followers must be used together",
            ));
        }
        if followers.is_adaptive() && !contexts.is_stochastic() && !threshold_ctx {
            return Err(Error::config(
                "scenario",
                "adaptive followers require stochastic contexts",
            ));
        }
        Ok(Environment {
            scenario: scenario.into(),
            contexts,
            followers,
            num_types,
            learner_id: String::new(),
            olt: threshold_ctx.then(OltState::new),
            audit: Vec::new(),
        })
    }

    /// Expands a named scenario preset for `inst` and horizon `horizon`.
    pub fn from_scenario(name: &str, inst: &GameInstance, horizon: usize) -> Result<Self> {
        let k = inst.num_types();
        let follower_probs = inst.follower_probs.clone().unwrap_or_else(|| vec![1.0 / k as f64; k]);
        let stochastic_contexts = || match &inst.context_space {
            ContextSpace::Finite { contexts } => {
                let n = contexts.len();
                ContextSource::Stochastic {
                    contexts: contexts.clone(),
                    probs: inst.context_probs.clone().unwrap_or_else(|| vec![1.0 / n as f64; n]),
                }
            }
            ContextSpace::Box { lo, hi, .. } => ContextSource::UniformBox {
                lo: lo.clone(),
                hi: hi.clone(),
            },
        };
        let (contexts, followers) = match name {
            "fully-stochastic" => (stochastic_contexts(), FollowerSource::Stochastic(follower_probs)),
            "stoch-follower-adv-context" => (
                ContextSource::Rotation(rotation_contexts(&inst.context_space)),
                FollowerSource::Stochastic(follower_probs),
            ),
            "stoch-context-adv-follower" => (stochastic_contexts(), FollowerSource::MajorityPunishing),
            "stoch-context-seq-follower" => (
                stochastic_contexts(),
                FollowerSource::Sequence(switching_sequence(k, horizon)),
            ),
            "olt-lower-bound" => {
                check_olt_shape(inst)?;
                (ContextSource::Threshold, FollowerSource::Threshold)
            }
            other => {
                return Err(Error::config(
                    "scenario",
                    format!("unknown scenario `{other}` (expected one of {})", SCENARIOS.join(", ")),
                ))
            }
        };
        Environment::new(name, k, contexts, followers)
    }

    pub fn set_learner_id(&mut self, id: impl Into<String>) {
        self.learner_id = id.into();
    }

    pub fn learner_id(&self) -> &str {
        &self.learner_id
    }

    /// Whether the follower source sees the leader's commitment.
    pub fn observes_commitment(&self) -> bool {
        matches!(self.followers, FollowerSource::Threshold)
    }

    pub fn audit_log(&self) -> &[FollowerAudit] {
        &self.audit
    }

    pub fn threshold_state(&self) -> Option<&OltState> {
        self.olt.as_ref()
    }

    /// Context for round `t` (0-based). Adaptive sources see completed rounds
    /// only.
    pub fn next_context<R: Rng + ?Sized>(&mut self, t: usize, past: &[RoundRecord], rng: &mut R) -> Result<Context> {
        debug_assert_eq!(past.len(), t);
        match &self.contexts {
            ContextSource::Stochastic { contexts, probs } => Ok(contexts[sample_index(probs, rng)].clone()),
            ContextSource::UniformBox { lo, hi } => {
                let v = lo
                    .iter()
                    .zip(hi)
                    .map(|(a, b)| if a == b { *a } else { rng.random_range(*a..*b) })
                    .collect();
                Context::new(v)
            }
            ContextSource::Sequence(seq) => seq.get(t).cloned().ok_or(Error::SequenceExhausted(t)),
            ContextSource::Rotation(ctxs) => Ok(ctxs[t % ctxs.len()].clone()),
            ContextSource::Threshold => Ok(self.olt.as_ref().expect("threshold state").context()),
        }
    }

    /// Type of the round-`t` follower. Never receives the current context.
    pub fn next_follower<R: Rng + ?Sized>(&mut self, t: usize, view: FollowerView<'_>, rng: &mut R) -> Result<usize> {
        self.audit.push(FollowerAudit {
            t,
            visible_rounds: view.past.len(),
            saw_commitment: view.commitment.is_some(),
        });
        let ty = match &self.followers {
            FollowerSource::Stochastic(p) => sample_index(p, rng),
            FollowerSource::Sequence(seq) => *seq.get(t).ok_or(Error::SequenceExhausted(t))?,
            FollowerSource::MajorityPunishing => {
                let mut counts = vec![0usize; self.num_types];
                for &f in view.past_types {
                    counts[f] += 1;
                }
                let min = *counts.iter().min().expect("K >= 1");
                counts.iter().rposition(|c| *c == min).expect("nonempty")
            }
            FollowerSource::Threshold => {
                let x = view
                    .commitment
                    .ok_or_else(|| Error::config("scenario", "threshold adversary needs the commitment"))?;
                let state = self.olt.as_ref().expect("threshold state");
                let (ty, next) = state.step(x);
                self.olt = Some(next);
                ty
            }
        };
        Ok(ty)
    }
}

fn sample_index<R: Rng + ?Sized>(probs: &[f64], rng: &mut R) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (i, p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return i;
        }
    }
    probs.iter().rposition(|p| *p > 0.0).unwrap_or(0)
}

/// The eight contexts cycled by the adversarial-context scenario: the first
/// eight of a finite space (repeating if fewer), or eight evenly spaced
/// points on the diagonal of a box.
pub fn rotation_contexts(space: &ContextSpace) -> Vec<Context> {
    match space {
        ContextSpace::Finite { contexts } => (0..ROTATION_LEN)
            .map(|i| contexts[i % contexts.len()].clone())
            .collect(),
        ContextSpace::Box { lo, hi, .. } => (0..ROTATION_LEN)
            .map(|i| {
                let s = i as f64 / (ROTATION_LEN - 1) as f64;
                Context {
                    vector: lo.iter().zip(hi).map(|(a, b)| a + s * (b - a)).collect(),
                    label: None,
                }
            })
            .collect(),
    }
}

/// Non-adaptive follower sequence committed before round one: runs of
/// `ceil(sqrt(T))` rounds cycling through the types.
pub fn switching_sequence(num_types: usize, horizon: usize) -> Vec<usize> {
    let run = (horizon as f64).sqrt().ceil().max(1.0) as usize;
    (0..horizon).map(|t| (t / run) % num_types).collect()
}

fn check_olt_shape(inst: &GameInstance) -> Result<()> {
    let ok = inst.leader_actions == 2
        && inst.follower_actions == 2
        && inst.num_types() == 2
        && matches!(&inst.context_space, ContextSpace::Box { dim: 2, .. });
    if ok {
        Ok(())
    } else {
        Err(Error::config(
            "scenario",
            "olt-lower-bound needs the thresholding instance (A = A_f = K = 2, contexts [w, 1])",
        ))
    }
}

/// The two-type matching game used by the thresholding reduction.
///
/// Contexts are `[w, 1]` with `w in [0, 1]`; the constant coordinate lets the
/// linear models express context-free utilities. Type 0 always plays action
/// 0, type 1 always plays action 1, and the leader earns `1{a_l = a_f}`.
pub fn build_olt_instance() -> GameInstance {
    let indicator = |a_l: usize, a_f: usize| if a_l == a_f { 1.0 } else { 0.0 };
    let leader = (0..2)
        .map(|l| (0..2).map(|f| vec![0.0, indicator(l, f)]).collect())
        .collect();
    let favoring = |action: usize| UtilityModel::LinearClipped {
        theta: (0..2)
            .map(|_| (0..2).map(|f| vec![0.0, indicator(f, action)]).collect())
            .collect(),
        context_free: true,
    };
    GameInstance {
        name: "olt".into(),
        leader_actions: 2,
        follower_actions: 2,
        types: vec![
            FollowerType {
                name: "alpha1".into(),
                utility: favoring(0),
            },
            FollowerType {
                name: "alpha2".into(),
                utility: favoring(1),
            },
        ],
        leader_utility: UtilityModel::LinearClipped {
            theta: leader,
            context_free: true,
        },
        context_space: ContextSpace::Box {
            dim: 2,
            lo: vec![0.0, 1.0],
            hi: vec![1.0, 1.0],
        },
        follower_probs: None,
        context_probs: None,
    }
}

/// Consistency interval of the thresholding adversary, kept in exact
/// rational arithmetic so that halving never stalls.
#[derive(Debug, Clone, PartialEq)]
pub struct OltState {
    pub lo: BigRational,
    pub hi: BigRational,
    /// Committed `(point, label)` pairs, label in {-1, +1}.
    pub history: Vec<(BigRational, i8)>,
}

impl Default for OltState {
    fn default() -> Self {
        Self::new()
    }
}

impl OltState {
    pub fn new() -> Self {
        OltState {
            lo: BigRational::from_integer(BigInt::from(0)),
            hi: BigRational::from_integer(BigInt::from(1)),
            history: Vec::new(),
        }
    }

    pub fn midpoint(&self) -> BigRational {
        (&self.lo + &self.hi) / BigRational::from_integer(BigInt::from(2))
    }

    /// The round's context `[w, 1]`, labeled with the exact value of `w`.
    pub fn context(&self) -> Context {
        let w = self.midpoint();
        Context {
            vector: vec![w.to_f64().unwrap_or(0.5), 1.0],
            label: Some(format!("olt:{w}")),
        }
    }

    /// Labels the current midpoint against commitment `x`: with `g = x[0]`,
    /// commits `y = -1` if `g >= 1/2` and `y = +1` otherwise, so the leader
    /// earns `min(g, 1 - g)`. `y = +1` keeps thresholds below the midpoint
    /// (`hi = w`), `y = -1` those at or above it (`lo = w`). Returns type 0
    /// iff `y = +1`.
    pub fn step(&self, x: &MixedStrategy) -> (usize, OltState) {
        let w = self.midpoint();
        let g = x.probs()[0];
        let mut next = self.clone();
        let y: i8 = if g >= 0.5 { -1 } else { 1 };
        if y == 1 {
            next.hi = w.clone();
        } else {
            next.lo = w.clone();
        }
        next.history.push((w, y));
        (if y == 1 { 0 } else { 1 }, next)
    }

    /// A threshold consistent with every committed label, if one exists.
    pub fn consistent_threshold(&self) -> Option<BigRational> {
        if self.lo >= self.hi {
            return None;
        }
        let s = self.midpoint();
        let ok = self.history.iter().all(|(w, y)| {
            let label = if *w > s { 1 } else { -1 };
            label == *y
        });
        ok.then_some(s)
    }
}
