use serde::Serialize;

use super::benchmark::benchmark_policy;
use super::Transcript;
use crate::error::{Error, Result};
use crate::game::GameInstance;
use crate::learners::Algorithm;
use crate::par::Exec;

/// Cumulative curves of one seed; index `t` covers rounds `0..=t`.
#[derive(Debug, Clone, Serialize)]
pub struct RegretReport {
    pub alg: Algorithm,
    pub seed: u64,
    pub cumulative_regret: Vec<f64>,
    pub benchmark_utility: Vec<f64>,
    pub learner_utility: Vec<f64>,
    pub benchmark_slack: f64,
}

impl RegretReport {
    pub fn horizon(&self) -> usize {
        self.cumulative_regret.len()
    }

    pub fn final_regret(&self) -> f64 {
        self.cumulative_regret.last().copied().unwrap_or(0.0)
    }
}

/// Scores a transcript against the best `E_z(delta)` policy in hindsight,
/// using expected (over the leader's mixing) utilities.
pub fn regret_report(inst: &GameInstance, tr: &Transcript, delta: f64, exec: Exec) -> Result<RegretReport> {
    let bench = benchmark_policy(inst, &tr.contexts(), &tr.types, delta, exec)?;
    let mut b = 0.0;
    let mut l = 0.0;
    let mut benchmark_utility = Vec::with_capacity(tr.len());
    let mut learner_utility = Vec::with_capacity(tr.len());
    let mut cumulative_regret = Vec::with_capacity(tr.len());
    for (rec, ub) in tr.records.iter().zip(&bench.per_round) {
        b += ub;
        l += rec.expected_utility;
        benchmark_utility.push(b);
        learner_utility.push(l);
        cumulative_regret.push(b - l);
    }
    Ok(RegretReport {
        alg: tr.alg,
        seed: tr.seed,
        cumulative_regret,
        benchmark_utility,
        learner_utility,
        benchmark_slack: bench.slack,
    })
}

/// Mean and sample standard deviation of cumulative regret across seeds.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AggregateCurve {
    pub seeds: usize,
    pub mean_regret: Vec<f64>,
    pub std_regret: Vec<f64>,
    pub mean_avg_regret: Vec<f64>,
}

impl AggregateCurve {
    pub fn horizon(&self) -> usize {
        self.mean_regret.len()
    }

    pub fn final_mean(&self) -> f64 {
        self.mean_regret.last().copied().unwrap_or(0.0)
    }

    pub fn final_std(&self) -> f64 {
        self.std_regret.last().copied().unwrap_or(0.0)
    }

    pub fn final_mean_avg(&self) -> f64 {
        self.mean_avg_regret.last().copied().unwrap_or(0.0)
    }
}

pub fn aggregate(reports: &[RegretReport]) -> Result<AggregateCurve> {
    let first = reports
        .first()
        .ok_or_else(|| Error::config("seeds", "need at least one seed"))?;
    let horizon = first.horizon();
    if let Some(bad) = reports.iter().find(|r| r.horizon() != horizon) {
        return Err(Error::config(
            "T",
            format!(
                "seed {} has {} rounds, seed {} has {horizon}",
                bad.seed,
                bad.horizon(),
                first.seed
            ),
        ));
    }
    let s = reports.len() as f64;
    let mut mean_regret = Vec::with_capacity(horizon);
    let mut std_regret = Vec::with_capacity(horizon);
    let mut mean_avg_regret = Vec::with_capacity(horizon);
    for t in 0..horizon {
        let mean = reports.iter().map(|r| r.cumulative_regret[t]).sum::<f64>() / s;
        let var = if reports.len() > 1 {
            reports
                .iter()
                .map(|r| (r.cumulative_regret[t] - mean).powi(2))
                .sum::<f64>()
                / (s - 1.0)
        } else {
            0.0
        };
        mean_regret.push(mean);
        std_regret.push(var.sqrt());
        mean_avg_regret.push(mean / (t + 1) as f64);
    }
    Ok(AggregateCurve {
        seeds: reports.len(),
        mean_regret,
        std_regret,
        mean_avg_regret,
    })
}

/// Least-squares fit of `ln R = a + b ln T`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SlopeFit {
    pub slope: f64,
    pub intercept: f64,
    pub std_error: f64,
}

/// Floor applied to regret values before taking logs.
const REGRET_FLOOR: f64 = 1e-6;

pub fn fit_regret_exponent(horizons: &[usize], regret: &[f64]) -> Result<SlopeFit> {
    if horizons.len() != regret.len() {
        return Err(Error::config("T", "one regret value per horizon"));
    }
    if horizons.len() < 3 {
        return Err(Error::config("T", "need at least 3 horizons to fit a slope"));
    }
    let lo = *horizons.iter().min().expect("nonempty");
    let hi = *horizons.iter().max().expect("nonempty");
    if lo == 0 || hi < 8 * lo {
        return Err(Error::config(
            "T",
            format!("horizons must span at least 8x (got {lo}..{hi})"),
        ));
    }
    let xs: Vec<f64> = horizons.iter().map(|t| (*t as f64).ln()).collect();
    let ys: Vec<f64> = regret.iter().map(|r| r.max(REGRET_FLOOR).ln()).collect();
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let rss: f64 = xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| (y - intercept - slope * x).powi(2))
        .sum();
    let std_error = if xs.len() > 2 {
        (rss / (n - 2.0) / sxx).sqrt()
    } else {
        0.0
    };
    Ok(SlopeFit {
        slope,
        intercept,
        std_error,
    })
}
