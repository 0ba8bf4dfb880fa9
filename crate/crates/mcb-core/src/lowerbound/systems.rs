//! Two reward systems an agent must tell apart, and the budgeted guessing
//! game. System A feeds every user fair coins regardless of actions. System B
//! plants a hidden optimal action per context: good users pay a small bias on
//! it, adversarial users answer from tapes drawn off the weight law.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::bandit::{BanditInstance, NoiseKind, Table};
use crate::error::Result;
use crate::lowerbound::law::{build_e_n, WeightLawE};
use crate::sim::rng::stream_rng;
use crate::sim::{
    run_episode, AdversaryStrategy, Agent, ArrivalModel, InteractionLog, Population,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SystemVariant {
    /// Fair coins everywhere; the optimal-arm table is decorative.
    RandomRewards,
    /// Good users: bias eps on the hidden optimal action. Adversaries: tapes.
    PlantedBias,
}

/// Parameters of one system: the hidden optimal-arm table, corruption rate,
/// bias, tape length and user count.
#[derive(Debug, Clone)]
pub struct SystemSpec {
    pub variant: SystemVariant,
    pub a_star: Vec<usize>,
    pub num_actions: usize,
    pub alpha: f64,
    pub eps: f64,
    pub n: usize,
    pub num_users: usize,
}

impl SystemSpec {
    pub fn num_contexts(&self) -> usize {
        self.a_star.len()
    }

    /// Uniformly random hidden table.
    pub fn random_a_star(num_contexts: usize, num_actions: usize, rng: &mut ChaCha8Rng) -> Vec<usize> {
        (0..num_contexts).map(|_| rng.gen_range(0..num_actions)).collect()
    }
}

/// Transcript plus whether some user accumulated more than n plays of the
/// hidden optimal action.
#[derive(Debug)]
pub struct SystemOutcome {
    pub log: InteractionLog,
    pub event_triggered: bool,
    pub max_correct_plays: usize,
}

fn system_instance(spec: &SystemSpec) -> Result<BanditInstance<f64>> {
    let s = spec.num_contexts();
    let mut mu = Table::filled(s, spec.num_actions, 0.5);
    if spec.variant == SystemVariant::PlantedBias {
        for (ctx, &best) in spec.a_star.iter().enumerate() {
            mu.set(ctx, best, 0.5 + spec.eps);
        }
    }
    let nu = vec![1.0 / s as f64; s];
    BanditInstance::new(nu, mu, NoiseKind::Bernoulli)
}

/// Run one system for `per_user_budget` interactions per user (round-robin
/// arrivals, contexts uniform for everyone). The tape law is built once and
/// each adversarial user consumes its own tape in order.
pub fn run_system(
    spec: &SystemSpec,
    agent: &mut dyn Agent,
    per_user_budget: usize,
    seed: u64,
) -> Result<SystemOutcome> {
    let instance = system_instance(spec)?;
    let population = match spec.variant {
        SystemVariant::RandomRewards => Population::all_good(spec.num_users),
        SystemVariant::PlantedBias => {
            let law: WeightLawE<f64> = build_e_n(spec.n, spec.alpha, spec.eps, spec.num_users)?;
            let strategy = AdversaryStrategy::LeCam { law, a_star: spec.a_star.clone() };
            let mut rng = stream_rng(seed, "population", 0);
            Population::sample_good_mask(spec.num_users, spec.alpha, strategy, &mut rng)
        }
    };
    let horizon = per_user_budget * spec.num_users;
    let log = run_episode(&instance, &population, ArrivalModel::RoundRobin, agent, horizon, seed)?;

    let mut correct = vec![0usize; spec.num_users];
    for rec in log.records() {
        if rec.action == spec.a_star[rec.context] {
            correct[rec.user] += 1;
        }
    }
    let max_correct_plays = correct.into_iter().max().unwrap_or(0);
    Ok(SystemOutcome { log, event_triggered: max_correct_plays > spec.n, max_correct_plays })
}

/// An agent that also names the system it believes it interacted with.
pub trait Distinguisher: Agent {
    fn guess(&self) -> SystemVariant;
}

/// Guesses by coin flip; plays arbitrary legal actions.
pub struct CoinFlipDistinguisher {
    num_actions: usize,
    rng: ChaCha8Rng,
    guess_heads: bool,
}

impl CoinFlipDistinguisher {
    pub fn new(num_actions: usize, seed: u64) -> Self {
        let mut rng = stream_rng(seed, "coinflip-agent", 0);
        let guess_heads = rng.gen::<f64>() < 0.5;
        Self { num_actions, rng, guess_heads }
    }
}

impl Agent for CoinFlipDistinguisher {
    fn choose(&mut self, _user: usize, _context: usize, _log: &InteractionLog) -> usize {
        self.rng.gen_range(0..self.num_actions)
    }
    fn observe(&mut self, _user: usize, _context: usize, _action: usize, _reward: f64) {}
}

impl Distinguisher for CoinFlipDistinguisher {
    fn guess(&self) -> SystemVariant {
        if self.guess_heads {
            SystemVariant::PlantedBias
        } else {
            SystemVariant::RandomRewards
        }
    }
}

/// Knows the hidden table; always plays it and thresholds the mean reward on
/// those plays at half the surviving bias.
pub struct OracleDistinguisher {
    a_star: Vec<usize>,
    alpha: f64,
    eps: f64,
    sum: f64,
    count: usize,
}

impl OracleDistinguisher {
    pub fn new(a_star: Vec<usize>, alpha: f64, eps: f64) -> Self {
        Self { a_star, alpha, eps, sum: 0.0, count: 0 }
    }
}

impl Agent for OracleDistinguisher {
    fn choose(&mut self, _user: usize, context: usize, _log: &InteractionLog) -> usize {
        self.a_star[context]
    }
    fn observe(&mut self, _user: usize, _context: usize, _action: usize, reward: f64) {
        self.sum += reward;
        self.count += 1;
    }
}

impl Distinguisher for OracleDistinguisher {
    fn guess(&self) -> SystemVariant {
        let mean = if self.count == 0 { 0.5 } else { self.sum / self.count as f64 };
        if mean > 0.5 + (1.0 - self.alpha) * self.eps / 2.0 {
            SystemVariant::PlantedBias
        } else {
            SystemVariant::RandomRewards
        }
    }
}

/// Blind scanner: cycles actions per context, then looks for any
/// (context, action) cell whose empirical mean clears the bias threshold.
pub struct ScanDistinguisher {
    num_actions: usize,
    alpha: f64,
    eps: f64,
    next_action: Vec<usize>,
    sums: Vec<Vec<f64>>,
    counts: Vec<Vec<usize>>,
}

impl ScanDistinguisher {
    pub fn new(num_contexts: usize, num_actions: usize, alpha: f64, eps: f64) -> Self {
        Self {
            num_actions,
            alpha,
            eps,
            next_action: vec![0; num_contexts],
            sums: vec![vec![0.0; num_actions]; num_contexts],
            counts: vec![vec![0; num_actions]; num_contexts],
        }
    }
}

impl Agent for ScanDistinguisher {
    fn choose(&mut self, _user: usize, context: usize, _log: &InteractionLog) -> usize {
        let a = self.next_action[context];
        self.next_action[context] = (a + 1) % self.num_actions;
        a
    }
    fn observe(&mut self, _user: usize, context: usize, action: usize, reward: f64) {
        self.sums[context][action] += reward;
        self.counts[context][action] += 1;
    }
}

impl Distinguisher for ScanDistinguisher {
    fn guess(&self) -> SystemVariant {
        for (row, counts) in self.sums.iter().zip(&self.counts) {
            for (&sum, &count) in row.iter().zip(counts) {
                if count >= 4 && sum / count as f64 > 0.5 + (1.0 - self.alpha) * self.eps / 2.0 {
                    return SystemVariant::PlantedBias;
                }
            }
        }
        SystemVariant::RandomRewards
    }
}

#[derive(Debug, Clone)]
pub struct DistinguishParams {
    pub alpha: f64,
    pub eps: f64,
    pub num_users: usize,
    pub num_contexts: usize,
    pub num_actions: usize,
    pub n: usize,
    pub per_user_budget: usize,
    /// Number of (system A, system B) seed pairs; total runs are 2x this.
    pub pairs: usize,
}

#[derive(Debug, Clone)]
pub struct DistinguishOutcome {
    pub accuracy: f64,
    pub runs: usize,
    pub event_rate: f64,
}

/// Paired guessing game: each pair shares the nature seed (and therefore the
/// hidden table), runs both variants, and scores the agent's guesses. The
/// factory receives a fresh agent seed and the pair's hidden table (only the
/// sanity-check oracle reads the latter).
pub fn distinguish_experiment<F>(
    params: &DistinguishParams,
    mut make_agent: F,
    master_seed: u64,
) -> Result<DistinguishOutcome>
where
    F: FnMut(u64, &[usize]) -> Box<dyn Distinguisher>,
{
    let mut correct = 0usize;
    let mut events = 0usize;
    for pair in 0..params.pairs {
        let pair_seed = crate::sim::rng::stream_key(master_seed, "distinguish", pair as u64);
        let mut nature = stream_rng(pair_seed, "a-star", 0);
        let a_star =
            SystemSpec::random_a_star(params.num_contexts, params.num_actions, &mut nature);
        for (idx, variant) in [SystemVariant::RandomRewards, SystemVariant::PlantedBias]
            .into_iter()
            .enumerate()
        {
            let spec = SystemSpec {
                variant,
                a_star: a_star.clone(),
                num_actions: params.num_actions,
                alpha: params.alpha,
                eps: params.eps,
                n: params.n,
                num_users: params.num_users,
            };
            let agent_seed = crate::sim::rng::stream_key(pair_seed, "agent-seed", idx as u64);
            let mut agent = make_agent(agent_seed, &a_star);
            let outcome = run_system(&spec, agent.as_mut(), params.per_user_budget, pair_seed)?;
            if outcome.event_triggered {
                events += 1;
            }
            if agent.guess() == variant {
                correct += 1;
            }
        }
    }
    let runs = 2 * params.pairs;
    Ok(DistinguishOutcome {
        accuracy: correct as f64 / runs as f64,
        runs,
        event_rate: events as f64 / runs as f64,
    })
}
