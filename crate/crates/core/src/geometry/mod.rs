//! Contextual best-response regions and the finite strategy menus built on them.
//!
//! For a context `z` and a best-response function `sigma` (one follower action
//! per type), the region `X_z(sigma)` is the set of leader mixed strategies
//! under which every type `i` best-responds with `sigma[i]`. Regions are
//! convex polytopes cut out of the simplex by weak and strict halfspaces; they
//! need not be closed. [`approx_extreme_points`] collects, per nonempty region,
//! every closure vertex that is a member of the region or a member within L1
//! distance `delta` of it.
//!
//! Everything here is exhaustive. Vertex enumeration visits every subset of
//! tight constraints, which is exponential but fine for the small action
//! counts this crate targets (see [`MAX_LEADER_ACTIONS`]).

mod extreme;
mod region;
mod spanner;

pub use extreme::{
    approx_extreme_points, contextual_regions, default_delta, ExtremePoint, ExtremePointSet, RegionReport,
};
pub use region::{closure_vertices, region_feasibility, region_halfspaces, Halfspace, Region, Witness};
pub use spanner::{barycentric_spanner, indicator_set, IndicatorEntry, IndicatorVector, Spanner, SpannerMode};

use serde::{Deserialize, Serialize};

use crate::game::FollowerAction;

/// Feasibility tolerance for closure vertices.
pub const GEO_TOL: f64 = 1e-9;
/// Two vertices closer than this in L-infinity are the same vertex.
pub const DEDUPE_TOL: f64 = 1e-7;
/// Hard cap on the number of leader actions.
pub const MAX_LEADER_ACTIONS: usize = 8;
/// Hard cap on `A_f^K`, the number of candidate best-response functions.
pub const MAX_RESPONSE_FUNCTIONS: usize = 4096;
/// Largest indicator set searched exhaustively for a spanner.
pub const SPANNER_EXHAUSTIVE_CAP: usize = 20;

/// Maps each follower type to an action; indexes a best-response region.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct BestResponseFunction(pub Vec<FollowerAction>);

impl BestResponseFunction {
    /// The `index`-th function in lexicographic order (type 0 most significant).
    pub fn from_index(mut index: usize, num_types: usize, follower_actions: usize) -> Self {
        let mut v = vec![FollowerAction(0); num_types];
        for slot in v.iter_mut().rev() {
            *slot = FollowerAction(index % follower_actions);
            index /= follower_actions;
        }
        BestResponseFunction(v)
    }

    pub fn action(&self, type_idx: usize) -> FollowerAction {
        self.0[type_idx]
    }

    pub fn num_types(&self) -> usize {
        self.0.len()
    }
}

pub(crate) fn response_function_count(follower_actions: usize, num_types: usize) -> Option<usize> {
    let mut n: usize = 1;
    for _ in 0..num_types {
        n = n.checked_mul(follower_actions)?;
    }
    Some(n)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sigma_indexing_is_lexicographic() {
        let all: Vec<_> = (0..4).map(|i| BestResponseFunction::from_index(i, 2, 2)).collect();
        let as_usize: Vec<Vec<usize>> = all.iter().map(|s| s.0.iter().map(|a| a.0).collect()).collect();
        assert_eq!(as_usize, vec![vec![0, 0], vec![0, 1], vec![1, 0], vec![1, 1]]);
        assert_eq!(response_function_count(4, 6), Some(4096));
    }
}
