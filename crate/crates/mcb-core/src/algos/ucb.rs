//! UCB comparison baselines: per-user tables without sharing, one pooled
//! table that ignores user identity, and a layered sub-sampling variant that
//! tolerates a bounded total corruption budget.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::{episode_seed, greedy_policy, AlgoOutput, Env, MuEstimate, Provenance};
use crate::bandit::Table;
use crate::error::{Error, Result};
use crate::sim::rng::stream_rng;
use crate::sim::{run_episode, Agent, InteractionLog};

/// Per-(context, action) running stats with a UCB1 index.
#[derive(Clone)]
struct UcbTable {
    num_actions: usize,
    counts: Vec<u64>,
    sums: Vec<f64>,
    total: u64,
}

impl UcbTable {
    fn new(num_contexts: usize, num_actions: usize) -> Self {
        Self {
            num_actions,
            counts: vec![0; num_contexts * num_actions],
            sums: vec![0.0; num_contexts * num_actions],
            total: 0,
        }
    }

    fn choose(&self, context: usize) -> usize {
        let base = context * self.num_actions;
        // Unplayed arms first, in index order.
        for a in 0..self.num_actions {
            if self.counts[base + a] == 0 {
                return a;
            }
        }
        let ln_t = (self.total.max(2) as f64).ln();
        let mut best = 0;
        let mut best_index = f64::NEG_INFINITY;
        for a in 0..self.num_actions {
            let n = self.counts[base + a] as f64;
            let index = self.sums[base + a] / n + (2.0 * ln_t / n).sqrt();
            if index > best_index {
                best_index = index;
                best = a;
            }
        }
        best
    }

    fn update(&mut self, context: usize, action: usize, reward: f64) {
        let cell = context * self.num_actions + action;
        self.counts[cell] += 1;
        self.sums[cell] += reward;
        self.total += 1;
    }

    fn mean(&self, context: usize, action: usize) -> Option<f64> {
        let cell = context * self.num_actions + action;
        (self.counts[cell] > 0).then(|| self.sums[cell] / self.counts[cell] as f64)
    }

    /// Empirical-mean table; unvisited cells read as zero.
    fn mean_table(&self, num_contexts: usize) -> Table<f64> {
        let mut t = Table::filled(num_contexts, self.num_actions, 0.0);
        for s in 0..num_contexts {
            for a in 0..self.num_actions {
                if let Some(m) = self.mean(s, a) {
                    t.set(s, a, m);
                }
            }
        }
        t
    }
}

struct PooledUcbAgent {
    table: UcbTable,
}

impl Agent for PooledUcbAgent {
    fn choose(&mut self, _user: usize, context: usize, _log: &InteractionLog) -> usize {
        self.table.choose(context)
    }
    fn observe(&mut self, _user: usize, context: usize, action: usize, reward: f64) {
        self.table.update(context, action, reward);
    }
}

/// One pooled UCB over (context, action) across all users, as if there were
/// no adversaries. Returned policy: greedy on the pooled means, ties to the
/// lowest index.
pub fn naive_ucb(env: &Env, horizon: usize, seed: u64) -> Result<AlgoOutput> {
    let (s, a) = (env.num_contexts(), env.num_actions());
    let mut agent = PooledUcbAgent { table: UcbTable::new(s, a) };
    run_episode(
        env.instance,
        env.population,
        env.arrival,
        &mut agent,
        horizon,
        episode_seed(seed, "naive-ucb"),
    )?;
    let table = agent.table.mean_table(s);
    let policy = greedy_policy(&table);
    Ok(AlgoOutput {
        mu_hat: MuEstimate {
            table,
            provenance: vec![Provenance::Univariate; s * a],
            scales: vec![1.0; s],
        },
        policy,
        warnings: Vec::new(),
        diagnostics: vec![("t", horizon as f64)],
    })
}

struct PerUserUcbAgent {
    tables: Vec<UcbTable>,
}

impl Agent for PerUserUcbAgent {
    fn choose(&mut self, user: usize, context: usize, _log: &InteractionLog) -> usize {
        self.tables[user].choose(context)
    }
    fn observe(&mut self, user: usize, context: usize, action: usize, reward: f64) {
        self.tables[user].update(context, action, reward);
    }
}

/// Independent UCB per user: no information sharing at all. The returned
/// policy is the greedy table of one uniformly drawn good user (the protocol
/// evaluates performance on a good user).
pub fn independent_ucb(env: &Env, horizon: usize, seed: u64) -> Result<AlgoOutput> {
    let (s, a, l) = (env.num_contexts(), env.num_actions(), env.num_users());
    let mut agent = PerUserUcbAgent { tables: vec![UcbTable::new(s, a); l] };
    run_episode(
        env.instance,
        env.population,
        env.arrival,
        &mut agent,
        horizon,
        episode_seed(seed, "independent-ucb"),
    )?;
    let good = env.population.good_users();
    if good.is_empty() {
        return Err(Error::InvalidParameter("population has no good users".into()));
    }
    let mut pick_rng = stream_rng(seed, "policy-user", 0);
    let chosen = good[pick_rng.gen_range(0..good.len())];
    let table = agent.tables[chosen].mean_table(s);
    let policy = greedy_policy(&table);
    Ok(AlgoOutput {
        mu_hat: MuEstimate {
            table,
            provenance: vec![Provenance::Univariate; s * a],
            scales: vec![1.0; s],
        },
        policy,
        warnings: Vec::new(),
        diagnostics: vec![("t", horizon as f64), ("evaluated_user", chosen as f64)],
    })
}

struct LayeredUcbAgent {
    layers: Vec<UcbTable>,
    layer_probs: Vec<f64>,
    active_layer: usize,
    rng: ChaCha8Rng,
}

impl Agent for LayeredUcbAgent {
    fn choose(&mut self, _user: usize, context: usize, _log: &InteractionLog) -> usize {
        let u: f64 = self.rng.gen();
        let mut acc = 0.0;
        self.active_layer = self.layer_probs.len() - 1;
        for (idx, &p) in self.layer_probs.iter().enumerate() {
            acc += p;
            if u < acc {
                self.active_layer = idx;
                break;
            }
        }
        self.layers[self.active_layer].choose(context)
    }
    fn observe(&mut self, _user: usize, context: usize, action: usize, reward: f64) {
        self.layers[self.active_layer].update(context, action, reward);
    }
}

/// Layered sub-sampled UCB with geometrically increasing corruption
/// tolerance: layer l is played with probability proportional to 2^-l, so a
/// total corruption budget of at most 2^l barely touches the layers above l.
/// The returned policy takes, per cell, the lower median of the layer means
/// that saw the cell. Robust to a sub-linear budget; a persistent
/// linear-rate attack poisons every layer in proportion and breaks it.
pub fn corruption_robust_ucb(
    env: &Env,
    corruption_budget: f64,
    horizon: usize,
    seed: u64,
) -> Result<AlgoOutput> {
    if corruption_budget < 0.0 {
        return Err(Error::InvalidParameter("corruption budget must be >= 0".into()));
    }
    let (s, a) = (env.num_contexts(), env.num_actions());
    let num_layers = (corruption_budget.max(1.0).log2().ceil() as usize + 1).clamp(1, 14);
    let raw: Vec<f64> = (0..num_layers).map(|l| 0.5f64.powi(l as i32)).collect();
    let total: f64 = raw.iter().sum();
    let layer_probs: Vec<f64> = raw.into_iter().map(|p| p / total).collect();

    let mut agent = LayeredUcbAgent {
        layers: vec![UcbTable::new(s, a); num_layers],
        layer_probs,
        active_layer: 0,
        rng: stream_rng(seed, "layer", 0),
    };
    run_episode(
        env.instance,
        env.population,
        env.arrival,
        &mut agent,
        horizon,
        episode_seed(seed, "corruption-robust-ucb"),
    )?;

    let mut table = Table::filled(s, a, 0.0);
    for ctx in 0..s {
        for arm in 0..a {
            let mut means: Vec<f64> =
                agent.layers.iter().filter_map(|layer| layer.mean(ctx, arm)).collect();
            if means.is_empty() {
                continue;
            }
            means.sort_by(|x, y| x.partial_cmp(y).unwrap());
            table.set(ctx, arm, means[(means.len() - 1) / 2]);
        }
    }
    let policy = greedy_policy(&table);
    Ok(AlgoOutput {
        mu_hat: MuEstimate {
            table,
            provenance: vec![Provenance::Univariate; s * a],
            scales: vec![1.0; s],
        },
        policy,
        warnings: Vec::new(),
        diagnostics: vec![
            ("t", horizon as f64),
            ("layers", num_layers as f64),
            ("budget", corruption_budget),
        ],
    })
}

/// Greedy mean tables of every good user under independent UCB, for the
/// adversary-isolation property test.
pub fn independent_good_tables(env: &Env, horizon: usize, seed: u64) -> Result<Vec<Table<f64>>> {
    let (s, a, l) = (env.num_contexts(), env.num_actions(), env.num_users());
    let mut agent = PerUserUcbAgent { tables: vec![UcbTable::new(s, a); l] };
    run_episode(
        env.instance,
        env.population,
        env.arrival,
        &mut agent,
        horizon,
        episode_seed(seed, "independent-ucb"),
    )?;
    Ok(env
        .population
        .good_users()
        .into_iter()
        .map(|u| agent.tables[u].mean_table(s))
        .collect())
}
