use serde::Serialize;

use super::region::Region;
use super::{response_function_count, BestResponseFunction, DEDUPE_TOL, MAX_LEADER_ACTIONS, MAX_RESPONSE_FUNCTIONS};
use crate::error::{Error, Result};
use crate::game::{Context, ContextPayoffs, GameInstance, MixedStrategy};
use crate::par::{self, Exec};

/// Default approximation radius for a horizon `T`: `min(1/T, 1e-3)`.
pub fn default_delta(horizon: usize) -> f64 {
    (1.0 / horizon.max(1) as f64).min(1e-3)
}

/// A member of `E_z(delta)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExtremePoint {
    pub x: MixedStrategy,
    pub sigma: BestResponseFunction,
    /// Closure vertex this point stands in for.
    pub vertex: MixedStrategy,
    pub perturbed: bool,
}

/// The finite strategy menu `E_z(delta)` for one context.
#[derive(Debug, Clone, Serialize)]
pub struct ExtremePointSet {
    pub context: Context,
    pub delta: f64,
    pub points: Vec<ExtremePoint>,
    /// Number of nonempty regions the points were drawn from.
    pub regions: usize,
}

impl ExtremePointSet {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

pub(crate) fn check_caps(inst: &GameInstance) -> Result<usize> {
    if inst.leader_actions > MAX_LEADER_ACTIONS {
        return Err(Error::CapExceeded(format!(
            "{} leader actions (max {MAX_LEADER_ACTIONS})",
            inst.leader_actions
        )));
    }
    match response_function_count(inst.follower_actions, inst.num_types()) {
        Some(n) if n <= MAX_RESPONSE_FUNCTIONS => Ok(n),
        _ => Err(Error::CapExceeded(format!(
            "A_f^K = {}^{} exceeds {MAX_RESPONSE_FUNCTIONS}",
            inst.follower_actions,
            inst.num_types()
        ))),
    }
}

/// All nonempty best-response regions under context `z`, in lexicographic
/// order of their best-response functions.
pub fn contextual_regions(inst: &GameInstance, z: &Context, exec: Exec) -> Result<Vec<Region>> {
    let n = check_caps(inst)?;
    let payoffs = inst.payoffs(z)?;
    Ok(regions_for(&payoffs, inst.num_types(), inst.follower_actions, n, exec))
}

fn regions_for(payoffs: &ContextPayoffs, k: usize, af: usize, n: usize, exec: Exec) -> Vec<Region> {
    par::map_range(exec, n, |idx| {
        Region::build(payoffs, BestResponseFunction::from_index(idx, k, af))
    })
    .into_iter()
    .filter(Region::is_nonempty)
    .collect()
}

/// Moves a non-member closure vertex toward the region's witness until it is
/// a member. The first step has L1 length exactly `delta` (or reaches the
/// witness); it is only lengthened when round-off keeps the point on the
/// boundary.
fn pull_inside(
    payoffs: &ContextPayoffs,
    sigma: &BestResponseFunction,
    v: &MixedStrategy,
    w: &MixedStrategy,
    delta: f64,
) -> MixedStrategy {
    let dist = v.l1_distance(w);
    let mut lambda = if dist > 0.0 { (delta / dist).min(1.0) } else { 1.0 };
    loop {
        let p: Vec<f64> = v
            .probs()
            .iter()
            .zip(w.probs())
            .map(|(a, b)| (1.0 - lambda) * a + lambda * b)
            .collect();
        let x = MixedStrategy::from_approx(p, 1e-9).expect("convex combination stays on the simplex");
        if lambda >= 1.0 || payoffs.response_profile(x.probs()) == sigma.0 {
            return x;
        }
        lambda = (2.0 * lambda).min(1.0);
    }
}

fn points_for_region(payoffs: &ContextPayoffs, region: &Region, delta: f64) -> Vec<ExtremePoint> {
    let witness = &region.witness.as_ref().expect("nonempty region").x;
    region
        .closure_vertices
        .iter()
        .map(|v| {
            if payoffs.response_profile(v.probs()) == region.sigma.0 {
                ExtremePoint {
                    x: v.clone(),
                    sigma: region.sigma.clone(),
                    vertex: v.clone(),
                    perturbed: false,
                }
            } else {
                ExtremePoint {
                    x: pull_inside(payoffs, &region.sigma, v, witness, delta),
                    sigma: region.sigma.clone(),
                    vertex: v.clone(),
                    perturbed: true,
                }
            }
        })
        .collect()
}

/// Builds `E_z(delta)`: for every nonempty region, each closure vertex that is
/// a member, otherwise the point `(1 - l) v + l w` toward the region witness
/// `w` with `l = min(1, delta / |w - v|_1)`. Membership is always decided by
/// the best-response oracle.
pub fn approx_extreme_points(inst: &GameInstance, z: &Context, delta: f64, exec: Exec) -> Result<ExtremePointSet> {
    if delta.is_nan() || delta <= 0.0 {
        return Err(Error::config("delta", format!("must be > 0 (got {delta})")));
    }
    let n = check_caps(inst)?;
    let payoffs = inst.payoffs(z)?;
    let regions = regions_for(&payoffs, inst.num_types(), inst.follower_actions, n, exec);
    let per_region = par::map_collect(exec, &regions, |r| points_for_region(&payoffs, r, delta));
    let mut points: Vec<ExtremePoint> = Vec::new();
    for p in per_region.into_iter().flatten() {
        if !points.iter().any(|q| q.x.linf_distance(&p.x) <= DEDUPE_TOL) {
            points.push(p);
        }
    }
    Ok(ExtremePointSet {
        context: z.clone(),
        delta,
        points,
        regions: regions.len(),
    })
}

/// Debug dump of the region geometry under one context.
#[derive(Debug, Clone, Serialize)]
pub struct RegionReport {
    pub context: Context,
    pub delta: f64,
    pub regions: Vec<RegionEntry>,
}

#[derive(Debug, Clone, Serialize)]
pub struct RegionEntry {
    pub sigma: Vec<usize>,
    pub vertices: Vec<MixedStrategy>,
    pub witness: Option<MixedStrategy>,
    pub witness_slack: Option<f64>,
    pub members: Vec<MixedStrategy>,
}

impl RegionReport {
    pub fn build(inst: &GameInstance, z: &Context, delta: f64, exec: Exec) -> Result<Self> {
        let regions = contextual_regions(inst, z, exec)?;
        let eps = approx_extreme_points(inst, z, delta, exec)?;
        let entries = regions
            .iter()
            .map(|r| RegionEntry {
                sigma: r.sigma.0.iter().map(|a| a.0).collect(),
                vertices: r.closure_vertices.clone(),
                witness: r.witness.as_ref().map(|w| w.x.clone()),
                witness_slack: r.witness.as_ref().map(|w| w.slack).filter(|s| s.is_finite()),
                members: eps
                    .points
                    .iter()
                    .filter(|p| p.sigma == r.sigma)
                    .map(|p| p.x.clone())
                    .collect(),
            })
            .collect();
        Ok(RegionReport {
            context: z.clone(),
            delta,
            regions: entries,
        })
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::build_olt_instance;
    use crate::game::{FollowerAction, PayoffMatrix};

    #[test]
    fn olt_instance_has_one_full_region() {
        let inst = build_olt_instance();
        let z = Context::new(vec![0.3, 1.0]).unwrap();
        let eps = approx_extreme_points(&inst, &z, 1e-3, Exec::Sequential).unwrap();
        assert_eq!(eps.regions, 1);
        let mut xs: Vec<Vec<f64>> = eps.points.iter().map(|p| Vec::from(p.x.clone())).collect();
        xs.sort_by(|a, b| a.partial_cmp(b).unwrap());
        assert_eq!(xs, vec![vec![0.0, 1.0], vec![1.0, 0.0]]);
        assert!(eps.points.iter().all(|p| !p.perturbed));
        assert_eq!(eps.points[0].sigma.0, vec![FollowerAction(0), FollowerAction(1)]);

        // dense grid: every x yields the same response profile
        let payoffs = inst.payoffs(&z).unwrap();
        for k in 0..=1000 {
            let g = k as f64 / 1000.0;
            assert_eq!(
                payoffs.response_profile(&[g, 1.0 - g]),
                vec![FollowerAction(0), FollowerAction(1)]
            );
        }
    }

    #[test]
    fn boundary_vertex_is_pulled_toward_witness() {
        // Region sigma = (a_0) of u_f rows (1,0),(0,1): needs x[0] > x[1].
        let payoffs = ContextPayoffs {
            leader: PayoffMatrix::from_rows(&[vec![0.0, 0.0], vec![0.0, 0.0]]),
            followers: vec![PayoffMatrix::from_rows(&[vec![1.0, 0.0], vec![0.0, 1.0]])],
        };
        let sigma = BestResponseFunction(vec![FollowerAction(0)]);
        let v = MixedStrategy::new(vec![0.5, 0.5]).unwrap();
        let w = MixedStrategy::new(vec![1.0, 0.0]).unwrap();
        let x = pull_inside(&payoffs, &sigma, &v, &w, 0.01);
        assert!((x.probs()[0] - 0.505).abs() < 1e-12);
        assert!((x.l1_distance(&v) - 0.01).abs() < 1e-12);
        assert_eq!(payoffs.best_response(0, x.probs()), FollowerAction(0));

        let payoffs_rev = ContextPayoffs {
            leader: payoffs.leader.clone(),
            followers: vec![PayoffMatrix::from_rows(&[vec![0.6, 0.4], vec![0.4, 0.6]])],
        };
        // tie at [0.5, 0.5] already resolves upward, so use a strictly-lower action region
        let region = Region::build(&payoffs_rev, BestResponseFunction(vec![FollowerAction(0)]));
        let pts = points_for_region(&payoffs_rev, &region, 0.01);
        let moved = pts.iter().find(|p| p.perturbed).unwrap();
        assert!((moved.x.l1_distance(&moved.vertex) - 0.01).abs() < 1e-12);
        assert_eq!(payoffs_rev.response_profile(moved.x.probs()), vec![FollowerAction(0)]);
    }

    #[test]
    fn member_vertices_are_not_perturbed() {
        // single follower action: one region, the whole simplex
        let inst = {
            let mut i = build_olt_instance();
            i.follower_actions = 1;
            for t in &mut i.types {
                if let crate::game::UtilityModel::LinearClipped { theta, .. } = &mut t.utility {
                    for row in theta.iter_mut() {
                        row.truncate(1);
                    }
                }
            }
            i.types.truncate(1);
            if let crate::game::UtilityModel::LinearClipped { theta, .. } = &mut i.leader_utility {
                for row in theta.iter_mut() {
                    row.truncate(1);
                }
            }
            i
        };
        inst.validate().unwrap();
        let eps = approx_extreme_points(&inst, &Context::new(vec![0.5, 1.0]).unwrap(), 0.1, Exec::Sequential).unwrap();
        assert_eq!(eps.len(), 2);
        assert!(eps.points.iter().all(|p| !p.perturbed && p.x == p.vertex));
    }

    #[test]
    fn rejects_nonpositive_delta() {
        let inst = build_olt_instance();
        let z = Context::new(vec![0.5, 1.0]).unwrap();
        assert!(approx_extreme_points(&inst, &z, 0.0, Exec::Sequential).is_err());
        assert!(approx_extreme_points(&inst, &z, -1.0, Exec::Sequential).is_err());
    }

    #[test]
    fn default_delta_caps_at_one_thousandth() {
        assert_eq!(default_delta(100), 1e-3);
        assert_eq!(default_delta(5000), 1.0 / 5000.0);
    }
}
