use itertools::Itertools;
use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use super::{BestResponseFunction, DEDUPE_TOL, GEO_TOL};
use crate::error::Result;
use crate::game::{Context, ContextPayoffs, GameInstance, MixedStrategy, TIE_TOL};

/// `<normal, x> >= 0`, or `> 0` when `strict`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Halfspace {
    pub normal: Vec<f64>,
    pub strict: bool,
}

impl Halfspace {
    pub fn weak(normal: Vec<f64>) -> Self {
        Halfspace { normal, strict: false }
    }

    pub fn strict(normal: Vec<f64>) -> Self {
        Halfspace { normal, strict: true }
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        self.normal.iter().zip(x).map(|(a, b)| a * b).sum()
    }

    fn scale(&self) -> f64 {
        self.normal.iter().fold(0.0, |m, v| f64::max(m, v.abs()))
    }
}

/// A point strictly inside a region, with its smallest strict-constraint slack.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Witness {
    pub x: MixedStrategy,
    /// `+inf` when the region has no strict constraints.
    pub slack: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct Region {
    pub sigma: BestResponseFunction,
    pub halfspaces: Vec<Halfspace>,
    pub closure_vertices: Vec<MixedStrategy>,
    pub witness: Option<Witness>,
}

impl Region {
    pub fn is_nonempty(&self) -> bool {
        self.witness.is_some()
    }

    pub(crate) fn build(payoffs: &ContextPayoffs, sigma: BestResponseFunction) -> Region {
        let halfspaces = halfspaces_for(payoffs, &sigma);
        let dim = payoffs.leader.leader_actions();
        let closure = closure_vertices(&halfspaces, dim);
        let witness = if closure.is_empty() {
            None
        } else {
            region_feasibility(&halfspaces, &closure).filter(|w| payoffs.response_profile(w.x.probs()) == sigma.0)
        };
        Region {
            sigma,
            halfspaces,
            closure_vertices: closure,
            witness,
        }
    }
}

/// Halfspaces describing `X_z(sigma)`: the simplex orthant constraints first,
/// then for every type `i` with `sigma[i] = a` a weak constraint against each
/// lower action and a strict one against each higher action.
pub fn region_halfspaces(inst: &GameInstance, z: &Context, sigma: &BestResponseFunction) -> Result<Vec<Halfspace>> {
    Ok(halfspaces_for(&inst.payoffs(z)?, sigma))
}

pub(crate) fn halfspaces_for(payoffs: &ContextPayoffs, sigma: &BestResponseFunction) -> Vec<Halfspace> {
    let dim = payoffs.leader.leader_actions();
    let mut out: Vec<Halfspace> = (0..dim)
        .map(|j| {
            let mut e = vec![0.0; dim];
            e[j] = 1.0;
            Halfspace::weak(e)
        })
        .collect();
    for (i, m) in payoffs.followers.iter().enumerate() {
        let a = sigma.action(i).0;
        let own = m.column(a);
        for other in 0..m.follower_actions() {
            if other == a {
                continue;
            }
            let diff: Vec<f64> = own.iter().zip(m.column(other)).map(|(u, v)| u - v).collect();
            out.push(if other < a {
                Halfspace::weak(diff)
            } else {
                Halfspace::strict(diff)
            });
        }
    }
    out
}

/// Solves the square system `rows * y = rhs`; `None` if (numerically) singular.
fn solve(rows: &[&[f64]], rhs: &[f64]) -> Option<Vec<f64>> {
    let n = rhs.len();
    let m = DMatrix::from_fn(n, n, |r, c| rows[r][c]);
    let lu = m.lu();
    if lu.determinant().abs() < 1e-10 {
        return None;
    }
    lu.solve(&DVector::from_column_slice(rhs))
        .map(|v| v.iter().copied().collect())
}

/// Normalized, deduplicated weak rows; zero rows are vacuous and dropped.
fn weak_rows(halfspaces: &[Halfspace]) -> Vec<Vec<f64>> {
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for h in halfspaces {
        let s = h.scale();
        if s <= GEO_TOL {
            continue;
        }
        let r: Vec<f64> = h.normal.iter().map(|v| v / s).collect();
        if !rows
            .iter()
            .any(|q| q.iter().zip(&r).all(|(a, b)| (a - b).abs() < 1e-12))
        {
            rows.push(r);
        }
    }
    rows
}

fn push_unique(points: &mut Vec<MixedStrategy>, x: MixedStrategy) {
    if !points.iter().any(|p| p.linf_distance(&x) <= DEDUPE_TOL) {
        points.push(x);
    }
}

/// Vertices of the closed polytope `{x in simplex : <h, x> >= 0 for all h}`.
///
/// Every subset of `dim - 1` constraints is made tight together with
/// `sum x = 1`; nonsingular solutions feasible within [`GEO_TOL`] are kept
/// and deduplicated at [`DEDUPE_TOL`]. An infeasible polytope yields no
/// vertices.
pub fn closure_vertices(halfspaces: &[Halfspace], dim: usize) -> Vec<MixedStrategy> {
    let rows = weak_rows(halfspaces);
    let ones = vec![1.0; dim];
    let feasible = |x: &[f64]| {
        rows.iter()
            .all(|r| r.iter().zip(x).map(|(a, b)| a * b).sum::<f64>() >= -GEO_TOL)
    };
    let mut out = Vec::new();
    if dim == 1 {
        if feasible(&[1.0]) {
            out.push(MixedStrategy::pure(1, 0));
        }
        return out;
    }
    let mut rhs = vec![0.0; dim];
    rhs[dim - 1] = 1.0;
    for subset in (0..rows.len()).combinations(dim - 1) {
        let mut system: Vec<&[f64]> = subset.iter().map(|&i| rows[i].as_slice()).collect();
        system.push(&ones);
        let Some(x) = solve(&system, &rhs) else { continue };
        if !feasible(&x) {
            continue;
        }
        if let Some(p) = MixedStrategy::from_approx(x, 1e-7) {
            push_unique(&mut out, p);
        }
    }
    out
}

/// Decides whether the region is nonempty by maximizing the smallest strict
/// slack `t` over its closure.
///
/// The problem `max t s.t. <s, x> >= t (strict s), <w, x> >= 0 (weak w),
/// x in simplex` is lifted to `(x, t)` and solved by enumerating the vertices
/// of the lifted polytope (with `t` boxed to `[-2, 2]`; utility differences
/// never exceed 1). The region is nonempty iff `t* > 2 * TIE_TOL`, the margin
/// the best-response oracle needs to resolve every strict comparison. Without
/// strict constraints the region is closed and the centroid of the closure
/// vertices serves as witness.
pub fn region_feasibility(halfspaces: &[Halfspace], closure: &[MixedStrategy]) -> Option<Witness> {
    if closure.is_empty() {
        return None;
    }
    let dim = closure[0].len();
    let strict: Vec<&Halfspace> = halfspaces.iter().filter(|h| h.strict).collect();
    if strict.iter().any(|h| h.scale() <= TIE_TOL) {
        // indifference against a higher action always resolves upward
        return None;
    }
    if strict.is_empty() {
        let mut c = vec![0.0; dim];
        for v in closure {
            c.iter_mut()
                .zip(v.probs())
                .for_each(|(a, b)| *a += b / closure.len() as f64);
        }
        return MixedStrategy::from_approx(c, 1e-7).map(|x| Witness {
            x,
            slack: f64::INFINITY,
        });
    }

    // lifted rows: (coefficients over (x, t), rhs) meaning row . y >= rhs
    let weak: Vec<Vec<f64>> = weak_rows(&halfspaces.iter().filter(|h| !h.strict).cloned().collect::<Vec<_>>());
    let mut lifted: Vec<(Vec<f64>, f64)> = Vec::new();
    for w in &weak {
        let mut r = w.clone();
        r.push(0.0);
        lifted.push((r, 0.0));
    }
    for s in &strict {
        let mut r = s.normal.clone();
        r.push(-1.0);
        lifted.push((r, 0.0));
    }
    let mut cap_hi = vec![0.0; dim + 1];
    cap_hi[dim] = -1.0;
    lifted.push((cap_hi, -2.0));
    let mut cap_lo = vec![0.0; dim + 1];
    cap_lo[dim] = 1.0;
    lifted.push((cap_lo, -2.0));

    let mut eq = vec![1.0; dim];
    eq.push(0.0);
    let feasible = |y: &[f64]| {
        lifted
            .iter()
            .all(|(r, b)| r.iter().zip(y).map(|(a, v)| a * v).sum::<f64>() >= b - GEO_TOL)
    };

    let mut best: Option<(f64, Vec<f64>)> = None;
    for subset in (0..lifted.len()).combinations(dim) {
        let mut system: Vec<&[f64]> = subset.iter().map(|&i| lifted[i].0.as_slice()).collect();
        system.push(&eq);
        let mut rhs: Vec<f64> = subset.iter().map(|&i| lifted[i].1).collect();
        rhs.push(1.0);
        let Some(y) = solve(&system, &rhs) else { continue };
        if !feasible(&y) {
            continue;
        }
        let t = y[dim];
        if best.as_ref().is_none_or(|(bt, _)| t > *bt + 1e-15) {
            best = Some((t, y));
        }
    }
    let (t, y) = best?;
    if t <= 2.0 * TIE_TOL {
        return None;
    }
    MixedStrategy::from_approx(y[..dim].to_vec(), 1e-7).map(|x| Witness { x, slack: t })
}
