use std::collections::HashMap;
use std::sync::Arc;

use super::hedge::WeightGrid;
use crate::error::Result;
use crate::game::{Context, ContextKey, ContextSpace, GameInstance, MixedStrategy};
use crate::geometry::{approx_extreme_points, ExtremePoint};
use crate::par::Exec;

/// `E_z(delta)` under one context with the leader's utility for every
/// point/follower-action pair.
#[derive(Debug, Clone)]
pub struct Menu {
    pub context: Context,
    pub points: Arc<Vec<ExtremePoint>>,
    /// `leader[j][a_f] = u(z, x_j, a_f)`.
    pub leader: Vec<Vec<f64>>,
}

impl Menu {
    pub fn build(inst: &GameInstance, z: &Context, delta: f64, exec: Exec) -> Result<Menu> {
        let set = approx_extreme_points(inst, z, delta, exec)?;
        Menu::with_points(inst, z, Arc::new(set.points))
    }

    /// Reuses a point set (valid when follower utilities ignore the context)
    /// and evaluates the leader's utilities under `z`.
    pub fn with_points(inst: &GameInstance, z: &Context, points: Arc<Vec<ExtremePoint>>) -> Result<Menu> {
        let m = inst.leader_utility.matrix(z)?;
        let leader = points
            .iter()
            .map(|p| (0..inst.follower_actions).map(|a| m.expected(p.x.probs(), a)).collect())
            .collect();
        Ok(Menu {
            context: z.clone(),
            points,
            leader,
        })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn strategy(&self, j: usize) -> &MixedStrategy {
        &self.points[j].x
    }

    /// Leader utility of point `j` against follower type `i`.
    pub fn utility_vs_type(&self, j: usize, i: usize) -> f64 {
        self.leader[j][self.points[j].sigma.action(i).0]
    }

    /// `sum_i w[i] * u(z, x_j, b_i(z, x_j))`.
    pub fn weighted_value(&self, j: usize, w: &[f64]) -> f64 {
        w.iter()
            .enumerate()
            .map(|(i, wi)| wi * self.utility_vs_type(j, i))
            .sum()
    }

    /// Index maximizing `score`; the first index wins ties.
    pub fn argmax_by(&self, mut score: impl FnMut(usize) -> f64) -> usize {
        let mut best = (f64::NEG_INFINITY, 0);
        for j in 0..self.len() {
            let s = score(j);
            if s > best.0 {
                best = (s, j);
            }
        }
        best.1
    }
}

/// Menus per context. Finite context spaces are cached by context key; box
/// spaces are recomputed on every request.
#[derive(Debug, Clone)]
pub struct MenuCache {
    inst: Arc<GameInstance>,
    delta: f64,
    exec: Exec,
    fixed_points: Option<Arc<Vec<ExtremePoint>>>,
    cache_enabled: bool,
    cache: HashMap<ContextKey, Arc<Menu>>,
}

impl MenuCache {
    pub fn new(inst: Arc<GameInstance>, delta: f64, exec: Exec) -> Self {
        let cache_enabled = matches!(inst.context_space, ContextSpace::Finite { .. });
        MenuCache {
            inst,
            delta,
            exec,
            fixed_points: None,
            cache_enabled,
            cache: HashMap::new(),
        }
    }

    /// A cache whose menus all share `points`.
    pub fn with_fixed_points(inst: Arc<GameInstance>, delta: f64, points: Arc<Vec<ExtremePoint>>) -> Self {
        let mut c = MenuCache::new(inst, delta, Exec::Sequential);
        c.fixed_points = Some(points);
        c
    }

    pub fn instance(&self) -> &Arc<GameInstance> {
        &self.inst
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn get(&mut self, z: &Context) -> Result<Arc<Menu>> {
        let key = self.cache_enabled.then(|| z.key());
        if let Some(m) = key.as_ref().and_then(|k| self.cache.get(k)) {
            return Ok(m.clone());
        }
        let menu = Arc::new(match &self.fixed_points {
            Some(points) => Menu::with_points(&self.inst, z, points.clone())?,
            None => Menu::build(&self.inst, z, self.delta, self.exec)?,
        });
        if let Some(k) = key {
            self.cache.insert(k, menu.clone());
        }
        Ok(menu)
    }
}

/// The policies `pi_w(z) = argmax_{x in E_z} sum_i w[i] u(z, x, b_i(z, x))`
/// for `w` on a weight grid.
#[derive(Debug, Clone)]
pub struct PolicyClass {
    pub grid: WeightGrid,
    weights: Vec<Vec<f64>>,
}

impl PolicyClass {
    pub fn new(grid: WeightGrid) -> Self {
        let weights = grid.all_weights();
        PolicyClass { grid, weights }
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn weights(&self, policy: usize) -> &[f64] {
        &self.weights[policy]
    }

    /// Menu index chosen by every policy under `menu`'s context.
    pub fn choices(&self, menu: &Menu) -> Vec<usize> {
        self.weights
            .iter()
            .map(|w| menu.argmax_by(|j| menu.weighted_value(j, w)))
            .collect()
    }
}

/// Menus plus per-context policy choices, cached alongside each other.
#[derive(Debug, Clone)]
pub struct PolicyEvaluator {
    pub menus: MenuCache,
    pub class: PolicyClass,
    cache: HashMap<ContextKey, Arc<Vec<usize>>>,
}

impl PolicyEvaluator {
    pub fn new(menus: MenuCache, class: PolicyClass) -> Self {
        PolicyEvaluator {
            menus,
            class,
            cache: HashMap::new(),
        }
    }

    pub fn evaluate(&mut self, z: &Context) -> Result<(Arc<Menu>, Arc<Vec<usize>>)> {
        let menu = self.menus.get(z)?;
        let key = self.menus.cache_enabled.then(|| z.key());
        if let Some(c) = key.as_ref().and_then(|k| self.cache.get(k)) {
            return Ok((menu, c.clone()));
        }
        let choices = Arc::new(self.class.choices(&menu));
        if let Some(k) = key {
            self.cache.insert(k, choices.clone());
        }
        Ok((menu, choices))
    }
}
