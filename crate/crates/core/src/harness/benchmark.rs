use std::collections::HashMap;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::game::{Context, ContextKey, GameInstance, MixedStrategy};
use crate::learners::Menu;
use crate::par::{self, Exec};

/// Total utility the restriction to `E_z(delta)` may cost the benchmark,
/// summed over all contexts.
pub const BENCHMARK_SLACK: f64 = 1.0;

#[derive(Debug, Clone, Serialize)]
pub struct BenchmarkEntry {
    pub context: Context,
    pub strategy: MixedStrategy,
    pub rounds: usize,
    pub utility: f64,
}

/// Best policy in hindsight over the menus `E_z(delta)`.
#[derive(Debug, Clone, Serialize)]
pub struct Benchmark {
    /// One entry per distinct context, in order of first appearance.
    pub entries: Vec<BenchmarkEntry>,
    /// Benchmark utility of each round.
    pub per_round: Vec<f64>,
    pub slack: f64,
}

impl Benchmark {
    pub fn total(&self) -> f64 {
        self.per_round.iter().sum()
    }

    pub fn strategy_for(&self, z: &Context) -> Option<&MixedStrategy> {
        let key = z.key();
        self.entries
            .iter()
            .find(|e| e.context.key() == key)
            .map(|e| &e.strategy)
    }
}

/// For each distinct context `z`, the point of `E_z(delta)` maximizing
/// `sum_t u(z, x, b_{f_t}(z, x)) 1{z_t = z}` on the realized sequences.
pub fn benchmark_policy(
    inst: &GameInstance,
    contexts: &[Context],
    types: &[usize],
    delta: f64,
    exec: Exec,
) -> Result<Benchmark> {
    if contexts.len() != types.len() {
        return Err(Error::config("types", "need one follower type per context"));
    }
    let mut order: Vec<ContextKey> = Vec::new();
    let mut groups: HashMap<ContextKey, (Context, Vec<usize>)> = HashMap::new();
    for (t, z) in contexts.iter().enumerate() {
        let key = z.key();
        groups
            .entry(key.clone())
            .or_insert_with(|| {
                order.push(key);
                (z.clone(), Vec::new())
            })
            .1
            .push(t);
    }
    let k = inst.num_types();
    let jobs: Vec<&(Context, Vec<usize>)> = order.iter().map(|key| &groups[key]).collect();
    let solved = par::map_collect(
        exec,
        &jobs,
        |(z, rounds)| -> Result<(BenchmarkEntry, Vec<(usize, f64)>)> {
            let menu = Menu::build(inst, z, delta, Exec::Sequential)?;
            let mut counts = vec![0.0; k];
            for &t in rounds {
                counts[types[t]] += 1.0;
            }
            let j = menu.argmax_by(|j| menu.weighted_value(j, &counts));
            let per_round: Vec<(usize, f64)> = rounds.iter().map(|&t| (t, menu.utility_vs_type(j, types[t]))).collect();
            let utility = per_round.iter().map(|(_, u)| u).sum();
            Ok((
                BenchmarkEntry {
                    context: z.clone(),
                    strategy: menu.strategy(j).clone(),
                    rounds: rounds.len(),
                    utility,
                },
                per_round,
            ))
        },
    );
    let mut per_round = vec![0.0; contexts.len()];
    let mut entries = Vec::with_capacity(solved.len());
    for res in solved {
        let (entry, rounds) = res?;
        for (t, u) in rounds {
            per_round[t] = u;
        }
        entries.push(entry);
    }
    Ok(Benchmark {
        entries,
        per_round,
        slack: BENCHMARK_SLACK,
    })
}
