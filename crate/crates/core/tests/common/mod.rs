//! Shared fixtures: random tabular games and brute-force oracles that do not
//! go through the library's payoff code.
#![allow(dead_code)]

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::sync::Arc;

use ctxstack::game::{ContextSpace, FollowerType, UtilityModel};
use ctxstack::{Context, GameInstance, MixedStrategy};
use rand::Rng;

/// Raw payoff tables of a random game, indexed `[ctx][a_l][a_f]`.
#[derive(Debug, Clone)]
pub struct RandomGame {
    pub inst: Arc<GameInstance>,
    pub contexts: Vec<Context>,
    pub leader: Vec<Vec<Vec<f64>>>,
    /// `followers[type][ctx][a_l][a_f]`.
    pub followers: Vec<Vec<Vec<Vec<f64>>>>,
}

#[derive(Debug, Clone, Copy)]
pub struct Shape {
    pub types: usize,
    pub leader_actions: usize,
    pub follower_actions: usize,
    pub contexts: usize,
    /// Entries are multiples of `1 / q` when set; otherwise continuous.
    pub quantum: Option<u32>,
    /// Followers share one table across contexts.
    pub context_free_followers: bool,
}

fn entry<R: Rng>(rng: &mut R, quantum: Option<u32>) -> f64 {
    match quantum {
        Some(q) => rng.random_range(0..=q) as f64 / q as f64,
        None => rng.random::<f64>(),
    }
}

fn table<R: Rng>(rng: &mut R, a: usize, af: usize, quantum: Option<u32>) -> Vec<Vec<f64>> {
    (0..a).map(|_| (0..af).map(|_| entry(rng, quantum)).collect()).collect()
}

pub fn random_game<R: Rng>(rng: &mut R, shape: Shape) -> RandomGame {
    let Shape {
        types,
        leader_actions: a,
        follower_actions: af,
        contexts: n,
        quantum,
        context_free_followers,
    } = shape;
    let labels: Vec<String> = (0..n).map(|i| format!("z{i}")).collect();
    let contexts: Vec<Context> = labels
        .iter()
        .enumerate()
        .map(|(i, l)| Context::labeled(l.clone(), vec![i as f64]).unwrap())
        .collect();
    let leader: Vec<_> = (0..n).map(|_| table(rng, a, af, quantum)).collect();
    let followers: Vec<Vec<_>> = (0..types)
        .map(|_| {
            if context_free_followers {
                let t = table(rng, a, af, quantum);
                vec![t; n]
            } else {
                (0..n).map(|_| table(rng, a, af, quantum)).collect()
            }
        })
        .collect();
    let as_model = |per_ctx: &Vec<Vec<Vec<f64>>>| UtilityModel::Tabular {
        tables: labels
            .iter()
            .cloned()
            .zip(per_ctx.iter().cloned())
            .collect::<BTreeMap<_, _>>(),
    };
    let mut inst = GameInstance {
        name: "random".into(),
        leader_actions: a,
        follower_actions: af,
        types: followers
            .iter()
            .enumerate()
            .map(|(i, f)| FollowerType {
                name: format!("type{i}"),
                utility: as_model(f),
            })
            .collect(),
        leader_utility: as_model(&leader),
        context_space: ContextSpace::Finite {
            contexts: contexts.clone(),
        },
        follower_probs: None,
        context_probs: None,
    };
    inst.normalize_and_validate().expect("generated instance is valid");
    RandomGame {
        inst: Arc::new(inst),
        contexts,
        leader,
        followers,
    }
}

impl RandomGame {
    /// Highest-index action within `1e-9` of the best, computed from the raw
    /// tables.
    pub fn best_response(&self, type_idx: usize, ctx: usize, x: &[f64]) -> usize {
        let t = &self.followers[type_idx][ctx];
        let af = t[0].len();
        let mut utils = vec![0.0; af];
        for (a_l, row) in t.iter().enumerate() {
            for (a_f, u) in row.iter().enumerate() {
                utils[a_f] += x[a_l] * u;
            }
        }
        let max = utils.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        (0..af).rev().find(|&a| utils[a] >= max - 1e-9).expect("nonempty")
    }

    pub fn leader_utility(&self, ctx: usize, x: &[f64], a_f: usize) -> f64 {
        x.iter().zip(&self.leader[ctx]).map(|(p, row)| p * row[a_f]).sum()
    }

    /// Leader utility of `x` against `type_idx` after the follower responds.
    pub fn value(&self, ctx: usize, x: &[f64], type_idx: usize) -> f64 {
        self.leader_utility(ctx, x, self.best_response(type_idx, ctx, x))
    }
}

/// A point of the simplex drawn either uniformly or from a coarse grid.
pub fn random_strategy<R: Rng>(rng: &mut R, dim: usize, grid: Option<u32>) -> MixedStrategy {
    match grid {
        Some(q) => {
            let mut left = q;
            let mut v = Vec::with_capacity(dim);
            for i in 0..dim {
                let take = if i + 1 == dim { left } else { rng.random_range(0..=left) };
                left -= take;
                v.push(take as f64 / q as f64);
            }
            MixedStrategy::from_approx(v, 1e-9).unwrap()
        }
        None => {
            let e: Vec<f64> = (0..dim).map(|_| -rng.random::<f64>().max(1e-300).ln()).collect();
            let s: f64 = e.iter().sum();
            MixedStrategy::from_approx(e.into_iter().map(|v| v / s).collect(), 1e-9).unwrap()
        }
    }
}

/// Every point of the simplex in `dim` coordinates with step `1 / q`.
pub fn simplex_grid(dim: usize, q: u32) -> Vec<Vec<f64>> {
    fn rec(dim: usize, left: u32, q: u32, cur: &mut Vec<f64>, out: &mut Vec<Vec<f64>>) {
        if dim == 1 {
            cur.push(left as f64 / q as f64);
            out.push(cur.clone());
            cur.pop();
            return;
        }
        for take in 0..=left {
            cur.push(take as f64 / q as f64);
            rec(dim - 1, left - take, q, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(dim, q, q, &mut Vec::new(), &mut out);
    out
}

pub fn instance_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../instances")
        .join(name)
}

pub fn load_instance(name: &str) -> Arc<GameInstance> {
    Arc::new(GameInstance::from_path(instance_path(name)).expect("instance loads"))
}
