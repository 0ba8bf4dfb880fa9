//! The interaction protocol: user arrivals, good-user context/reward
//! sampling, adversarial strategies with full history access, and transcript
//! logging.

pub mod episode;
pub mod rng;

pub use episode::{arrival_counts, perturb_population, run_episode, verify_arrival, ArrivalModel};

use std::io::Write;

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::bandit::{BanditInstance, NoiseKind, Table};
use crate::error::{Error, Result};
use crate::lowerbound::law::WeightLawE;

/// One interaction: step, user, context, action, reward.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogRecord {
    pub t: usize,
    pub user: usize,
    pub context: usize,
    pub action: usize,
    pub reward: f64,
}

/// Full transcript plus running per-user and per-context counters.
///
/// Whether a record came from an adversarial user is tracked privately and is
/// only reachable through the analysis/export methods, never through the
/// record stream that agents read.
#[derive(Debug, Clone, Default)]
pub struct InteractionLog {
    records: Vec<LogRecord>,
    user_counts: Vec<usize>,
    context_counts: Vec<usize>,
    adversarial: Vec<bool>,
}

impl InteractionLog {
    pub fn new(num_users: usize, num_contexts: usize) -> Self {
        Self {
            records: Vec::new(),
            user_counts: vec![0; num_users],
            context_counts: vec![0; num_contexts],
            adversarial: Vec::new(),
        }
    }

    pub(crate) fn push(&mut self, record: LogRecord, from_adversary: bool) {
        self.user_counts[record.user] += 1;
        self.context_counts[record.context] += 1;
        self.records.push(record);
        self.adversarial.push(from_adversary);
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn records(&self) -> &[LogRecord] {
        &self.records
    }

    /// n_i(t) for the current t.
    pub fn user_counts(&self) -> &[usize] {
        &self.user_counts
    }

    /// n_s(t) for the current t.
    pub fn context_counts(&self) -> &[usize] {
        &self.context_counts
    }

    pub fn adversarial_count(&self) -> usize {
        self.adversarial.iter().filter(|&&b| b).count()
    }

    pub fn adversarial_fraction(&self) -> f64 {
        if self.records.is_empty() {
            0.0
        } else {
            self.adversarial_count() as f64 / self.records.len() as f64
        }
    }

    /// CSV export with the analysis-only adversary column.
    pub fn export_csv<W: Write>(&self, w: &mut W) -> std::io::Result<()> {
        writeln!(w, "t,user,context,action,reward,is_adversarial")?;
        for (rec, adv) in self.records.iter().zip(&self.adversarial) {
            writeln!(
                w,
                "{},{},{},{},{},{}",
                rec.t, rec.user, rec.context, rec.action, rec.reward, u8::from(*adv)
            )?;
        }
        Ok(())
    }

    /// Counters recomputed from scratch equal the running ones.
    pub fn counters_consistent(&self) -> bool {
        let mut users = vec![0usize; self.user_counts.len()];
        let mut contexts = vec![0usize; self.context_counts.len()];
        let mut last_t = 0;
        for rec in &self.records {
            if rec.t != last_t + 1 {
                return false;
            }
            last_t = rec.t;
            users[rec.user] += 1;
            contexts[rec.context] += 1;
        }
        users == self.user_counts && contexts == self.context_counts
    }
}

/// How a boost adversary picks the context it reports.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BoostContexts {
    /// Cycle deterministically through all contexts (equal poison per context).
    Sweep,
    /// Always report this one context.
    Fixed(usize),
}

/// Behavior of an adversarial user. All strategies see the full history and
/// the underlying instance.
#[derive(Debug, Clone)]
pub enum AdversaryStrategy {
    /// Indistinguishable from a good user (contexts from nu, rewards from R).
    Honest,
    /// Report `reward_hi` whenever the played action matches the target
    /// policy in the reported context, `reward_lo` otherwise.
    Boost {
        target: Vec<usize>,
        reward_hi: f64,
        reward_lo: f64,
        contexts: BoostContexts,
    },
    /// Inverted preferences: punish the instance-optimal arm, reward the rest.
    /// Contexts are reported uniformly at random.
    Flip { reward_hi: f64, reward_lo: f64 },
    /// Tape adversary: on plays of `a_star(s)` it reads a pre-drawn reward
    /// tape sampled from the weight law, one tape per user, consumed in
    /// order; fair-coin rewards otherwise (and after the tape runs out).
    /// Contexts are reported uniformly at random.
    LeCam { law: WeightLawE<f64>, a_star: Vec<usize> },
}

impl AdversaryStrategy {
    /// The default coordinated attack: boost a fixed suboptimal arm in every
    /// context (one past the optimal arm), reporting contexts in rotation.
    pub fn default_boost(instance: &BanditInstance<f64>) -> Self {
        let a = instance.num_actions();
        let target = (0..instance.num_contexts())
            .map(|s| (crate::bandit::argmax_lowest(instance.mu().row(s)) + 1) % a)
            .collect();
        AdversaryStrategy::Boost {
            target,
            reward_hi: 1.0,
            reward_lo: 0.0,
            contexts: BoostContexts::Sweep,
        }
    }
}

/// The L users: good mask, per-adversary strategy, optional per-user mean
/// perturbations for the good users.
#[derive(Debug, Clone)]
pub struct Population {
    num_users: usize,
    good: Vec<bool>,
    strategies: Vec<Option<AdversaryStrategy>>,
    per_user_mu: Option<Vec<Table<f64>>>,
    hetero_eps0: f64,
}

impl Population {
    pub fn all_good(num_users: usize) -> Self {
        Self {
            num_users,
            good: vec![true; num_users],
            strategies: vec![None; num_users],
            per_user_mu: None,
            hetero_eps0: 0.0,
        }
    }

    /// The last floor(alpha * L) users are adversarial and share `strategy`.
    pub fn with_adversaries(num_users: usize, alpha: f64, strategy: AdversaryStrategy) -> Result<Self> {
        if !(0.0..0.5).contains(&alpha) {
            return Err(Error::InvalidParameter(format!("alpha must lie in [0, 1/2), got {alpha}")));
        }
        let bad = (alpha * num_users as f64).floor() as usize;
        let mut pop = Self::all_good(num_users);
        for i in num_users - bad..num_users {
            pop.good[i] = false;
            pop.strategies[i] = Some(strategy.clone());
        }
        Ok(pop)
    }

    /// Good/adversarial drawn i.i.d.: each user is adversarial with
    /// probability `alpha` (the construction used by the indistinguishable
    /// systems).
    pub fn sample_good_mask(
        num_users: usize,
        alpha: f64,
        strategy: AdversaryStrategy,
        rng: &mut ChaCha8Rng,
    ) -> Self {
        let mut pop = Self::all_good(num_users);
        for i in 0..num_users {
            if rng.gen::<f64>() < alpha {
                pop.good[i] = false;
                pop.strategies[i] = Some(strategy.clone());
            }
        }
        pop
    }

    /// Replace every adversary's strategy.
    pub fn with_strategy(mut self, strategy: AdversaryStrategy) -> Self {
        for i in 0..self.num_users {
            if !self.good[i] {
                self.strategies[i] = Some(strategy.clone());
            }
        }
        self
    }

    pub fn len(&self) -> usize {
        self.num_users
    }

    pub fn is_empty(&self) -> bool {
        self.num_users == 0
    }

    pub fn is_good(&self, user: usize) -> bool {
        self.good[user]
    }

    pub fn good_count(&self) -> usize {
        self.good.iter().filter(|&&g| g).count()
    }

    pub fn good_users(&self) -> Vec<usize> {
        (0..self.num_users).filter(|&i| self.good[i]).collect()
    }

    pub fn strategy(&self, user: usize) -> Option<&AdversaryStrategy> {
        self.strategies[user].as_ref()
    }

    pub fn hetero_eps0(&self) -> f64 {
        self.hetero_eps0
    }

    /// The user's own mean table when preferences are perturbed.
    pub fn user_mu(&self, user: usize) -> Option<&Table<f64>> {
        self.per_user_mu.as_ref().map(|v| &v[user])
    }

    pub(crate) fn set_perturbations(&mut self, tables: Vec<Table<f64>>, eps0: f64) {
        self.per_user_mu = Some(tables);
        self.hetero_eps0 = eps0;
    }
}

/// Anything that can play the interaction protocol. `choose` may read the
/// full transcript so far; `observe` delivers the reward for the step just
/// played.
pub trait Agent {
    fn choose(&mut self, user: usize, context: usize, log: &InteractionLog) -> usize;
    fn observe(&mut self, user: usize, context: usize, action: usize, reward: f64);
}

/// Plays a fixed policy (stochastic policies draw from the agent's own rng).
pub struct FixedPolicyAgent {
    policy: crate::bandit::Policy<f64>,
    rng: ChaCha8Rng,
}

impl FixedPolicyAgent {
    pub fn new(policy: crate::bandit::Policy<f64>, seed: u64) -> Self {
        Self { policy, rng: rng::stream_rng(seed, "agent", 0) }
    }
}

impl Agent for FixedPolicyAgent {
    fn choose(&mut self, _user: usize, context: usize, _log: &InteractionLog) -> usize {
        match &self.policy {
            crate::bandit::Policy::Deterministic(v) => v[context],
            crate::bandit::Policy::Stochastic(rows) => {
                sample_categorical(&rows[context], &mut self.rng)
            }
        }
    }

    fn observe(&mut self, _user: usize, _context: usize, _action: usize, _reward: f64) {}
}

/// Uniformly random actions.
pub struct UniformAgent {
    num_actions: usize,
    rng: ChaCha8Rng,
}

impl UniformAgent {
    pub fn new(num_actions: usize, seed: u64) -> Self {
        Self { num_actions, rng: rng::stream_rng(seed, "agent", 0) }
    }
}

impl Agent for UniformAgent {
    fn choose(&mut self, _user: usize, _context: usize, _log: &InteractionLog) -> usize {
        self.rng.gen_range(0..self.num_actions)
    }

    fn observe(&mut self, _user: usize, _context: usize, _action: usize, _reward: f64) {}
}

/// Replays a recorded action sequence verbatim.
pub struct ReplayAgent {
    actions: Vec<usize>,
    pos: usize,
}

impl ReplayAgent {
    pub fn from_log(log: &InteractionLog) -> Self {
        Self { actions: log.records().iter().map(|r| r.action).collect(), pos: 0 }
    }
}

impl Agent for ReplayAgent {
    fn choose(&mut self, _user: usize, _context: usize, _log: &InteractionLog) -> usize {
        let a = self.actions[self.pos];
        self.pos += 1;
        a
    }

    fn observe(&mut self, _user: usize, _context: usize, _action: usize, _reward: f64) {}
}

/// Draw an index from an unnormalized-free probability vector.
pub fn sample_categorical(probs: &[f64], rng: &mut ChaCha8Rng) -> usize {
    let u: f64 = rng.gen();
    let mut acc = 0.0;
    for (i, &p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return i;
        }
    }
    probs.len() - 1
}

/// One reward draw from the noise law around `mean`. The truncated Gaussian
/// clamps at three standard deviations symmetrically around the mean, which
/// preserves the mean and only shrinks the variance.
pub fn sample_reward(noise: NoiseKind, mean: f64, rng: &mut ChaCha8Rng) -> f64 {
    match noise {
        NoiseKind::Bernoulli => {
            if rng.gen::<f64>() < mean {
                1.0
            } else {
                0.0
            }
        }
        NoiseKind::TruncatedGaussian { variance } => {
            let z = standard_normal(rng).clamp(-3.0, 3.0);
            mean + variance.sqrt() * z
        }
    }
}

/// Box-Muller draw; consumes exactly two uniforms.
pub fn standard_normal(rng: &mut ChaCha8Rng) -> f64 {
    let u1: f64 = 1.0 - rng.gen::<f64>();
    let u2: f64 = rng.gen();
    (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}
