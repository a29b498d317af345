use std::fs;
use std::io;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::report::{aggregate, fit_regret_exponent, regret_report, AggregateCurve, RegretReport, SlopeFit};
use super::{run_seed, Transcript};
use crate::error::{Error, Result};
use crate::game::GameInstance;
use crate::learners::{Algorithm, LearnerParams};
use crate::par::{self, Exec};

/// One `run`: a learner on a scenario for `seeds` seeds of `T` rounds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub scenario: String,
    pub alg: Algorithm,
    #[serde(rename = "T")]
    pub horizon: usize,
    pub seeds: usize,
    /// Seeds used are `seed_base..seed_base + seeds`.
    #[serde(default)]
    pub seed_base: u64,
    #[serde(default)]
    pub params: LearnerParams,
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.horizon == 0 {
            return Err(Error::config("T", "must be >= 1"));
        }
        if self.seeds == 0 {
            return Err(Error::config("seeds", "must be >= 1"));
        }
        self.params.validate()
    }

    pub fn seed_values(&self) -> impl Iterator<Item = u64> + '_ {
        (0..self.seeds as u64).map(|s| self.seed_base + s)
    }
}

#[derive(Debug, Clone)]
pub struct ExperimentOutput {
    pub config: ExperimentConfig,
    pub transcripts: Vec<Transcript>,
    pub reports: Vec<RegretReport>,
    pub aggregate: AggregateCurve,
}

/// Runs every seed (in parallel under [`Exec::Parallel`]) and aggregates.
pub fn run_experiment(inst: &Arc<GameInstance>, cfg: &ExperimentConfig, exec: Exec) -> Result<ExperimentOutput> {
    cfg.validate()?;
    let delta = cfg.params.delta_for(cfg.horizon);
    let seeds: Vec<u64> = cfg.seed_values().collect();
    let runs = par::map_collect(exec, &seeds, |&seed| -> Result<(Transcript, RegretReport)> {
        let tr = run_seed(inst, &cfg.scenario, cfg.alg, &cfg.params, cfg.horizon, seed)?;
        let rep = regret_report(inst, &tr, delta, Exec::Sequential)?;
        Ok((tr, rep))
    });
    let mut transcripts = Vec::with_capacity(runs.len());
    let mut reports = Vec::with_capacity(runs.len());
    for r in runs {
        let (tr, rep) = r?;
        transcripts.push(tr);
        reports.push(rep);
    }
    let aggregate = aggregate(&reports)?;
    Ok(ExperimentOutput {
        config: cfg.clone(),
        transcripts,
        reports,
        aggregate,
    })
}

fn fmt_f64(v: f64) -> String {
    format!("{v}")
}

fn csv_err(e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        other => Error::Io(std::io::Error::other(format!("{other:?}"))),
    }
}

/// Columns `t, mean_regret, std_regret, mean_avg_regret`; `t` runs from 1.
pub fn write_aggregate_csv(path: &Path, curve: &AggregateCurve) -> Result<()> {
    write_aggregate(fs::File::create(path)?, curve)
}

pub fn write_aggregate<W: io::Write>(out: W, curve: &AggregateCurve) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["t", "mean_regret", "std_regret", "mean_avg_regret"])
        .map_err(csv_err)?;
    for t in 0..curve.horizon() {
        w.write_record([
            (t + 1).to_string(),
            fmt_f64(curve.mean_regret[t]),
            fmt_f64(curve.std_regret[t]),
            fmt_f64(curve.mean_avg_regret[t]),
        ])
        .map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

/// Round-by-round record of one seed. `follower_type` is the realized type;
/// `type_revealed` says whether the learner saw it.
pub fn write_transcript_csv(path: &Path, tr: &Transcript, rep: &RegretReport) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
    w.write_record([
        "t",
        "context",
        "strategy",
        "follower_type",
        "type_revealed",
        "follower_action",
        "leader_action",
        "realized_utility",
        "expected_utility",
        "benchmark_utility",
        "cumulative_regret",
    ])
    .map_err(csv_err)?;
    for (i, rec) in tr.records.iter().enumerate() {
        let context = rec.context.label.clone().unwrap_or_else(|| join(&rec.context.vector));
        w.write_record([
            (rec.t + 1).to_string(),
            context,
            join(rec.strategy.probs()),
            tr.types[i].to_string(),
            rec.follower_type.is_some().to_string(),
            rec.follower_action.0.to_string(),
            rec.leader_action.to_string(),
            fmt_f64(rec.realized_utility),
            fmt_f64(rec.expected_utility),
            fmt_f64(rep.benchmark_utility[i]),
            fmt_f64(rep.cumulative_regret[i]),
        ])
        .map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

fn join(v: &[f64]) -> String {
    v.iter().map(|x| fmt_f64(*x)).collect::<Vec<_>>().join(";")
}

#[derive(Serialize)]
struct RunMetadata<'a> {
    instance: &'a str,
    instance_name: &'a str,
    scenario: &'a str,
    alg: Algorithm,
    #[serde(rename = "T")]
    horizon: usize,
    seeds: Vec<u64>,
    params: &'a LearnerParams,
    delta: f64,
    benchmark_slack: f64,
    final_mean_regret: f64,
    final_std_regret: f64,
    final_mean_avg_regret: f64,
    threshold_consistent: Option<bool>,
    version: &'static str,
}

impl ExperimentOutput {
    /// Writes `aggregate.csv`, `run.json` and, if `transcripts`, one
    /// `seed_<n>.csv` per seed into `dir`.
    pub fn write(&self, dir: &Path, instance_ref: &str, transcripts: bool) -> Result<()> {
        fs::create_dir_all(dir)?;
        write_aggregate_csv(&dir.join("aggregate.csv"), &self.aggregate)?;
        if transcripts {
            for (tr, rep) in self.transcripts.iter().zip(&self.reports) {
                write_transcript_csv(&dir.join(format!("seed_{}.csv", tr.seed)), tr, rep)?;
            }
        }
        let consistent = self
            .transcripts
            .iter()
            .map(|t| t.threshold_consistent)
            .try_fold(true, |acc, c| c.map(|c| acc && c));
        let meta = RunMetadata {
            instance: instance_ref,
            instance_name: self.transcripts.first().map_or("", |t| t.instance.as_str()),
            scenario: &self.config.scenario,
            alg: self.config.alg,
            horizon: self.config.horizon,
            seeds: self.config.seed_values().collect(),
            params: &self.config.params,
            delta: self.config.params.delta_for(self.config.horizon),
            benchmark_slack: self.reports.first().map_or(0.0, |r| r.benchmark_slack),
            final_mean_regret: self.aggregate.final_mean(),
            final_std_regret: self.aggregate.final_std(),
            final_mean_avg_regret: self.aggregate.final_mean_avg(),
            threshold_consistent: consistent,
            version: env!("CARGO_PKG_VERSION"),
        };
        fs::write(dir.join("run.json"), serde_json::to_string_pretty(&meta)? + "\n")?;
        Ok(())
    }
}

/// A scaling study: every algorithm at every horizon.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    /// Instance file, relative to the config file.
    pub instance: PathBuf,
    pub scenario: String,
    pub algs: Vec<Algorithm>,
    #[serde(rename = "T")]
    pub horizons: Vec<usize>,
    pub seeds: usize,
    #[serde(default)]
    pub seed_base: u64,
    #[serde(default)]
    pub params: LearnerParams,
    /// Output directory, relative to the config file.
    #[serde(default)]
    pub out: Option<PathBuf>,
    /// Also write per-seed transcripts.
    #[serde(default)]
    pub transcripts: bool,
}

impl SweepConfig {
    pub fn from_path(path: &Path) -> Result<(SweepConfig, PathBuf)> {
        let cfg: SweepConfig = serde_json::from_str(&fs::read_to_string(path)?)?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok((cfg, base))
    }

    pub fn validate(&self) -> Result<()> {
        if self.algs.is_empty() {
            return Err(Error::config("algs", "list at least one algorithm"));
        }
        if self.horizons.is_empty() || self.horizons.contains(&0) {
            return Err(Error::config("T", "list at least one positive horizon"));
        }
        if self.seeds == 0 {
            return Err(Error::config("seeds", "must be >= 1"));
        }
        self.params.validate()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepPoint {
    pub alg: Algorithm,
    #[serde(rename = "T")]
    pub horizon: usize,
    pub mean_regret: f64,
    pub std_regret: f64,
    pub mean_avg_regret: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepOutput {
    pub points: Vec<SweepPoint>,
    /// Fitted exponent per algorithm, absent if the horizons cannot support
    /// a fit.
    pub slopes: Vec<(Algorithm, Option<SlopeFit>)>,
}

/// Runs a sweep; with an output directory, writes one run directory per
/// `(alg, T)` plus `summary.csv` and `summary.json`.
pub fn run_sweep(inst: &Arc<GameInstance>, cfg: &SweepConfig, out: Option<&Path>, exec: Exec) -> Result<SweepOutput> {
    cfg.validate()?;
    let mut points = Vec::new();
    let mut slopes = Vec::new();
    for &alg in &cfg.algs {
        let mut finals = Vec::new();
        for &horizon in &cfg.horizons {
            let run = ExperimentConfig {
                scenario: cfg.scenario.clone(),
                alg,
                horizon,
                seeds: cfg.seeds,
                seed_base: cfg.seed_base,
                params: cfg.params.clone(),
            };
            let res = run_experiment(inst, &run, exec)?;
            if let Some(dir) = out {
                let sub = dir.join(alg.as_str()).join(format!("T{horizon}"));
                res.write(&sub, &cfg.instance.to_string_lossy(), cfg.transcripts)?;
            }
            finals.push(res.aggregate.final_mean());
            points.push(SweepPoint {
                alg,
                horizon,
                mean_regret: res.aggregate.final_mean(),
                std_regret: res.aggregate.final_std(),
                mean_avg_regret: res.aggregate.final_mean_avg(),
            });
        }
        slopes.push((alg, fit_regret_exponent(&cfg.horizons, &finals).ok()));
    }
    let output = SweepOutput { points, slopes };
    if let Some(dir) = out {
        fs::create_dir_all(dir)?;
        let mut w = csv::Writer::from_path(dir.join("summary.csv")).map_err(csv_err)?;
        w.write_record(["alg", "T", "mean_regret", "std_regret", "mean_avg_regret"])
            .map_err(csv_err)?;
        for p in &output.points {
            w.write_record([
                p.alg.to_string(),
                p.horizon.to_string(),
                fmt_f64(p.mean_regret),
                fmt_f64(p.std_regret),
                fmt_f64(p.mean_avg_regret),
            ])
            .map_err(csv_err)?;
        }
        w.flush()?;
        fs::write(dir.join("summary.json"), serde_json::to_string_pretty(&output)? + "\n")?;
    }
    Ok(output)
}
