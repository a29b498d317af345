//! `ctxstack`: run learners on Stackelberg games with side information.
//!
//! The worker pool size follows `RAYON_NUM_THREADS`.

use std::path::PathBuf;
use std::process::ExitCode;
use std::sync::Arc;

use anyhow::{Context as _, Result};
use clap::{Parser, Subcommand};
use ctxstack::geometry::RegionReport;
use ctxstack::harness::{resolve_context, run_experiment, run_sweep, write_aggregate, ExperimentConfig, SweepConfig};
use ctxstack::learners::{Algorithm, LearnerParams};
use ctxstack::{Exec, GameInstance};

#[derive(Parser)]
#[command(
    name = "ctxstack",
    version,
    about = "Online learning in Stackelberg games with side information"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one learner on one scenario over several seeds.
    Run(RunArgs),
    /// Run a scaling study described by a JSON config.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        /// Overrides the config's output directory.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Dump the best-response regions and extreme points under one context.
    Regions {
        #[arg(long)]
        instance: PathBuf,
        /// Context label (finite spaces) or comma-separated vector (box spaces).
        #[arg(long)]
        context: String,
        #[arg(long, default_value_t = 1e-3)]
        delta: f64,
    },
}

#[derive(clap::Args)]
struct RunArgs {
    #[arg(long)]
    instance: PathBuf,
    #[arg(long)]
    scenario: String,
    #[arg(long)]
    alg: Algorithm,
    #[arg(long = "T")]
    horizon: usize,
    #[arg(long)]
    seeds: usize,
    #[arg(long, default_value_t = 0)]
    seed_base: u64,
    #[arg(long)]
    delta: Option<f64>,
    #[arg(long)]
    eta: Option<f64>,
    /// Weight-grid resolution.
    #[arg(long = "M")]
    m: Option<usize>,
    /// Exploration rounds per spanner element.
    #[arg(long = "N")]
    n: Option<usize>,
    /// Number of blocks.
    #[arg(long = "Z")]
    z: Option<usize>,
    /// Output directory; without it the aggregate CSV goes to stdout.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Skip the per-seed transcript files.
    #[arg(long)]
    no_transcripts: bool,
}

fn load_instance(path: &PathBuf) -> Result<Arc<GameInstance>> {
    let inst = GameInstance::from_path(path).with_context(|| format!("loading instance {}", path.display()))?;
    Ok(Arc::new(inst))
}

fn run(args: RunArgs) -> Result<()> {
    let inst = load_instance(&args.instance)?;
    let cfg = ExperimentConfig {
        scenario: args.scenario,
        alg: args.alg,
        horizon: args.horizon,
        seeds: args.seeds,
        seed_base: args.seed_base,
        params: LearnerParams {
            delta: args.delta,
            eta: args.eta,
            m: args.m,
            n: args.n,
            z: args.z,
        },
    };
    let res = run_experiment(&inst, &cfg, Exec::default())?;
    match args.out {
        Some(dir) => {
            res.write(&dir, &args.instance.to_string_lossy(), !args.no_transcripts)?;
            eprintln!(
                "{} T={} seeds={}: mean R(T) = {:.4}, R(T)/T = {:.5} -> {}",
                cfg.alg,
                cfg.horizon,
                cfg.seeds,
                res.aggregate.final_mean(),
                res.aggregate.final_mean_avg(),
                dir.display()
            );
        }
        None => write_aggregate(std::io::stdout().lock(), &res.aggregate)?,
    }
    Ok(())
}

fn sweep(config: PathBuf, out: Option<PathBuf>) -> Result<()> {
    let (cfg, base) = SweepConfig::from_path(&config).with_context(|| format!("reading {}", config.display()))?;
    let inst = load_instance(&base.join(&cfg.instance))?;
    let out = out.or_else(|| cfg.out.as_ref().map(|o| base.join(o)));
    let res = run_sweep(&inst, &cfg, out.as_deref(), Exec::default())?;
    println!("alg,T,mean_regret,std_regret,mean_avg_regret");
    for p in &res.points {
        println!(
            "{},{},{},{},{}",
            p.alg, p.horizon, p.mean_regret, p.std_regret, p.mean_avg_regret
        );
    }
    for (alg, fit) in &res.slopes {
        match fit {
            Some(f) => eprintln!("{alg}: slope {:.3} +/- {:.3}", f.slope, f.std_error),
            None => eprintln!("{alg}: no slope (need >= 3 horizons spanning 8x)"),
        }
    }
    Ok(())
}

fn regions(instance: PathBuf, context: String, delta: f64) -> Result<()> {
    let inst = load_instance(&instance)?;
    let z = resolve_context(&inst, &context)?;
    let report = RegionReport::build(&inst, &z, delta, Exec::default())?;
    println!("{}", report.to_json()?);
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let res = match cli.command {
        Command::Run(args) => run(args),
        Command::Sweep { config, out } => sweep(config, out),
        Command::Regions {
            instance,
            context,
            delta,
        } => regions(instance, context, delta),
    };
    match res {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
