use itertools::Itertools;
use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use super::{ExtremePointSet, SPANNER_EXHAUSTIVE_CAP};
use crate::error::Result;
use crate::game::{FollowerAction, GameInstance, MixedStrategy};

/// `bits[i] = 1` iff follower type `i` plays the generating action.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize)]
pub struct IndicatorVector(pub Vec<u8>);

impl IndicatorVector {
    /// Indicator of `sigma = a_f` over follower types.
    pub fn of(sigma: &[FollowerAction], a_f: FollowerAction) -> Self {
        IndicatorVector(sigma.iter().map(|a| u8::from(*a == a_f)).collect())
    }

    pub fn as_f64(&self) -> Vec<f64> {
        self.0.iter().map(|b| f64::from(*b)).collect()
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|b| *b == 0)
    }
}

/// An element of `W` together with a strategy/action pair that realizes it.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IndicatorEntry {
    pub bits: IndicatorVector,
    pub realizer_x: MixedStrategy,
    pub realizer_action: FollowerAction,
}

/// The set `W` of best-response indicator vectors, deduplicated, each with one
/// realizer. Requires context-free follower utilities, so a single menu
/// (computed under any context) covers every round.
pub fn indicator_set(inst: &GameInstance, menu: &ExtremePointSet) -> Result<Vec<IndicatorEntry>> {
    inst.check_followers_context_free()?;
    let mut out: Vec<IndicatorEntry> = Vec::new();
    for p in &menu.points {
        for a in 0..inst.follower_actions {
            let bits = IndicatorVector::of(&p.sigma.0, FollowerAction(a));
            if !out.iter().any(|e| e.bits == bits) {
                out.push(IndicatorEntry {
                    bits,
                    realizer_x: p.x.clone(),
                    realizer_action: FollowerAction(a),
                });
            }
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum SpannerMode {
    /// Volume-maximizing basis found by exhaustive search; coefficients lie in `[-1, 1]`.
    Exhaustive,
    /// Iterative swapping until no swap grows the volume by more than `factor`;
    /// coefficients lie in `[-factor, factor]`.
    Iterative { factor: f64 },
}

/// A barycentric spanner of `W` within its linear span.
#[derive(Debug, Clone)]
pub struct Spanner {
    pub elements: Vec<IndicatorEntry>,
    pub mode: SpannerMode,
    dim: usize,
    basis: DMatrix<f64>,
    gram_inv: DMatrix<f64>,
}

fn gram_det(cols: &[&[f64]], dim: usize) -> f64 {
    if cols.is_empty() {
        return 1.0;
    }
    let b = DMatrix::from_fn(dim, cols.len(), |r, c| cols[c][r]);
    (b.transpose() * &b).determinant()
}

/// Iteration factor used when `W` is too large for exhaustive search.
pub const ITERATIVE_FACTOR: f64 = 1.0 + 1e-6;

/// Selects `rank(W)` elements of `W` maximizing the spanned volume.
///
/// Up to [`SPANNER_EXHAUSTIVE_CAP`] elements every subset is scored by its
/// Gram determinant; beyond that a greedy basis is improved by single swaps
/// until none grows the volume by a factor above [`ITERATIVE_FACTOR`].
/// Ties keep the earliest subset.
pub fn barycentric_spanner(entries: &[IndicatorEntry]) -> Spanner {
    let dim = entries.first().map_or(0, |e| e.bits.0.len());
    let vecs: Vec<Vec<f64>> = entries.iter().map(|e| e.bits.as_f64()).collect();
    let rank = if entries.is_empty() || dim == 0 {
        0
    } else {
        DMatrix::from_fn(dim, vecs.len(), |r, c| vecs[c][r])
            .svd(false, false)
            .rank(1e-9)
    };

    let (chosen, mode): (Vec<usize>, SpannerMode) = if rank == 0 {
        (Vec::new(), SpannerMode::Exhaustive)
    } else if entries.len() <= SPANNER_EXHAUSTIVE_CAP {
        let mut best: Option<(f64, Vec<usize>)> = None;
        for subset in (0..vecs.len()).combinations(rank) {
            let cols: Vec<&[f64]> = subset.iter().map(|&i| vecs[i].as_slice()).collect();
            let vol = gram_det(&cols, dim);
            if best.as_ref().is_none_or(|(b, _)| vol > *b + 1e-9) {
                best = Some((vol, subset));
            }
        }
        (best.expect("rank > 0 implies a subset").1, SpannerMode::Exhaustive)
    } else {
        (
            iterative_basis(&vecs, dim, rank),
            SpannerMode::Iterative {
                factor: ITERATIVE_FACTOR,
            },
        )
    };

    let r = chosen.len();
    let basis = DMatrix::from_fn(dim, r, |row, c| vecs[chosen[c]][row]);
    let gram_inv = if r == 0 {
        DMatrix::zeros(0, 0)
    } else {
        (basis.transpose() * &basis)
            .try_inverse()
            .expect("spanner basis is linearly independent")
    };
    Spanner {
        elements: chosen.iter().map(|&i| entries[i].clone()).collect(),
        mode,
        dim,
        basis,
        gram_inv,
    }
}

fn iterative_basis(vecs: &[Vec<f64>], dim: usize, rank: usize) -> Vec<usize> {
    let score = |idx: &[usize]| {
        let cols: Vec<&[f64]> = idx.iter().map(|&i| vecs[i].as_slice()).collect();
        gram_det(&cols, dim)
    };
    let mut chosen: Vec<usize> = Vec::with_capacity(rank);
    for _ in 0..rank {
        let mut best = (0.0, usize::MAX);
        for i in 0..vecs.len() {
            if chosen.contains(&i) {
                continue;
            }
            let mut cand = chosen.clone();
            cand.push(i);
            let s = score(&cand);
            if s > best.0 + 1e-12 {
                best = (s, i);
            }
        }
        chosen.push(best.1);
    }
    let threshold = ITERATIVE_FACTOR * ITERATIVE_FACTOR;
    loop {
        let current = score(&chosen);
        let mut swapped = false;
        'outer: for slot in 0..rank {
            for i in 0..vecs.len() {
                if chosen.contains(&i) {
                    continue;
                }
                let mut cand = chosen.clone();
                cand[slot] = i;
                if score(&cand) > threshold * current {
                    chosen = cand;
                    swapped = true;
                    break 'outer;
                }
            }
        }
        if !swapped {
            return chosen;
        }
    }
}

impl Spanner {
    pub fn rank(&self) -> usize {
        self.elements.len()
    }

    /// Upper bound on `|lambda_i|` guaranteed by the construction.
    pub fn coefficient_bound(&self) -> f64 {
        match self.mode {
            SpannerMode::Exhaustive => 1.0,
            SpannerMode::Iterative { factor } => factor,
        }
    }

    /// Coefficients `lambda` with `sum_i lambda_i b_i = w` for `w` in the span
    /// (least squares otherwise). All zero for a rank-0 spanner.
    pub fn coefficients(&self, w: &[f64]) -> Vec<f64> {
        if self.rank() == 0 {
            return Vec::new();
        }
        assert_eq!(w.len(), self.dim, "indicator dimension mismatch");
        let rhs = self.basis.transpose() * DVector::from_column_slice(w);
        (&self.gram_inv * rhs).iter().copied().collect()
    }

    pub fn reconstruct(&self, lambda: &[f64]) -> Vec<f64> {
        if self.rank() == 0 {
            return vec![0.0; self.dim];
        }
        (&self.basis * DVector::from_column_slice(lambda))
            .iter()
            .copied()
            .collect()
    }
}
