use rand::{Rng, RngCore};

use crate::error::{Error, Result};

/// Exponential weights over a finite expert set.
#[derive(Debug, Clone, PartialEq)]
pub struct HedgeState {
    cum_loss: Vec<f64>,
    eta: f64,
    /// Declared per-update loss range; updates outside it are rejected.
    range: (f64, f64),
}

/// Slack allowed on the declared loss range for round-off.
const RANGE_TOL: f64 = 1e-9;

impl HedgeState {
    pub fn new(experts: usize, eta: f64, range: (f64, f64)) -> Result<Self> {
        if experts == 0 {
            return Err(Error::config("policies", "need at least one expert"));
        }
        if !(eta > 0.0 && eta.is_finite()) {
            return Err(Error::config(
                "eta",
                format!("must be a positive finite number (got {eta})"),
            ));
        }
        Ok(HedgeState {
            cum_loss: vec![0.0; experts],
            eta,
            range,
        })
    }

    pub fn len(&self) -> usize {
        self.cum_loss.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cum_loss.is_empty()
    }

    pub fn eta(&self) -> f64 {
        self.eta
    }

    pub fn cumulative_loss(&self) -> &[f64] {
        &self.cum_loss
    }

    /// `p[i] ∝ exp(-eta * L[i])`, computed relative to the smallest loss.
    pub fn probabilities(&self) -> Vec<f64> {
        let min = self.cum_loss.iter().copied().fold(f64::INFINITY, f64::min);
        let w: Vec<f64> = self.cum_loss.iter().map(|l| (-self.eta * (l - min)).exp()).collect();
        let total: f64 = w.iter().sum();
        w.into_iter().map(|v| v / total).collect()
    }

    pub fn sample(&self, rng: &mut dyn RngCore) -> usize {
        if self.cum_loss.len() == 1 {
            return 0;
        }
        let p = self.probabilities();
        let u: f64 = rng.random();
        let mut acc = 0.0;
        for (i, pi) in p.iter().enumerate() {
            acc += pi;
            if u < acc {
                return i;
            }
        }
        p.iter().rposition(|v| *v > 0.0).unwrap_or(0)
    }

    pub fn update(&mut self, losses: &[f64]) -> Result<()> {
        assert_eq!(losses.len(), self.cum_loss.len(), "one loss per expert");
        let (lo, hi) = self.range;
        if let Some(&bad) = losses
            .iter()
            .find(|l| !l.is_finite() || **l < lo - RANGE_TOL || **l > hi + RANGE_TOL)
        {
            return Err(Error::LossOutOfRange { value: bad, lo, hi });
        }
        for (c, l) in self.cum_loss.iter_mut().zip(losses) {
            *c += l;
        }
        Ok(())
    }
}

/// Default full-information rate `sqrt(ln|P| / T)`. A single expert gets the
/// rate of two, since any positive value is equivalent there.
pub fn default_eta(experts: usize, horizon: usize) -> f64 {
    ((experts.max(2) as f64).ln() / horizon.max(1) as f64).sqrt()
}

/// All weight vectors over `K` types with entries in multiples of `1/M`,
/// ordered lexicographically by their integer numerators.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightGrid {
    pub resolution: usize,
    pub numerators: Vec<Vec<usize>>,
}

impl WeightGrid {
    pub fn new(num_types: usize, resolution: usize) -> Result<Self> {
        if num_types == 0 {
            return Err(Error::config("types", "need at least one follower type"));
        }
        if resolution == 0 {
            return Err(Error::config("M", "grid resolution must be >= 1"));
        }
        let mut out = Vec::new();
        let mut cur = Vec::with_capacity(num_types);
        compositions(resolution, num_types, &mut cur, &mut out);
        Ok(WeightGrid {
            resolution,
            numerators: out,
        })
    }

    pub fn len(&self) -> usize {
        self.numerators.len()
    }

    pub fn is_empty(&self) -> bool {
        self.numerators.is_empty()
    }

    pub fn weights(&self, i: usize) -> Vec<f64> {
        let m = self.resolution as f64;
        self.numerators[i].iter().map(|c| *c as f64 / m).collect()
    }

    pub fn all_weights(&self) -> Vec<Vec<f64>> {
        (0..self.len()).map(|i| self.weights(i)).collect()
    }
}

fn compositions(remaining: usize, parts: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
    if parts == 1 {
        cur.push(remaining);
        out.push(cur.clone());
        cur.pop();
        return;
    }
    for c in 0..=remaining {
        cur.push(c);
        compositions(remaining - c, parts - 1, cur, out);
        cur.pop();
    }
}

/// `C(n, k)` without overflow for the sizes used here.
pub fn binomial(n: usize, k: usize) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    (0..k).fold(1u128, |acc, i| acc * (n - i) as u128 / (i + 1) as u128)
}
