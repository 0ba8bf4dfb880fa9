//! Learning algorithms: the group-and-trim baseline, the random-play
//! high-dimensional baseline, the context-distribution estimator, the
//! combined robust learner, and the UCB comparison baselines.

mod baselines;
mod robust_mcb;
mod ucb;

pub use baselines::{highdim_baseline, mab_baseline, value_error_certificate};
pub use robust_mcb::{estimate_nu, robust_mcb, robust_mcb_with_known_nu, NuEstimate};
pub use ucb::{corruption_robust_ucb, independent_good_tables, independent_ucb, naive_ucb};

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::bandit::{BanditInstance, Policy, Table};
use crate::sim::episode::ArrivalModel;
use crate::sim::rng::{stream_key, stream_rng};
use crate::sim::{Agent, InteractionLog, Population};

/// The environment handles an algorithm interacts with.
#[derive(Clone, Copy)]
pub struct Env<'a> {
    pub instance: &'a BanditInstance<f64>,
    pub population: &'a Population,
    pub arrival: ArrivalModel,
}

impl<'a> Env<'a> {
    pub fn num_contexts(&self) -> usize {
        self.instance.num_contexts()
    }

    pub fn num_actions(&self) -> usize {
        self.instance.num_actions()
    }

    pub fn num_users(&self) -> usize {
        self.population.len()
    }
}

/// Which estimation route produced a mean-table cell.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Provenance {
    Univariate,
    HighDim,
}

/// Estimated score table with per-cell provenance and the context scales
/// used. Scores are argmax-equivalent within each context but not calibrated
/// across contexts when scaling is involved.
#[derive(Debug, Clone)]
pub struct MuEstimate {
    pub table: Table<f64>,
    pub provenance: Vec<Provenance>,
    pub scales: Vec<f64>,
}

impl MuEstimate {
    pub fn provenance_at(&self, context: usize, action: usize) -> Provenance {
        self.provenance[context * self.table.cols() + action]
    }
}

/// Per-context variance equalizer from the pre-phase:
/// sigma_s^2 = max(n_s(T0), 20 ln S) / T0.
#[derive(Debug, Clone)]
pub struct ContextScale {
    pub sigma_sq: Vec<f64>,
    pub t0: usize,
}

impl ContextScale {
    pub fn from_counts(context_counts: &[usize], t0: usize) -> Self {
        let s = context_counts.len();
        let floor = 20.0 * (s as f64).ln();
        let sigma_sq = context_counts
            .iter()
            .map(|&n| (n as f64).max(floor) / t0 as f64)
            .collect();
        Self { sigma_sq, t0 }
    }

    pub fn sigma(&self, context: usize) -> f64 {
        self.sigma_sq[context].sqrt()
    }
}

/// Per-(context, user) arm assignment over the frequent contexts, with the
/// inverse group index.
#[derive(Debug, Clone)]
pub struct GroupAssignment {
    /// Frequent contexts in ascending order.
    contexts: Vec<usize>,
    /// Slot of each context in `contexts` (None outside).
    slot_of_context: Vec<Option<usize>>,
    /// [slot][user] -> assigned arm.
    arm_of: Vec<Vec<usize>>,
    /// [slot][arm] -> member users.
    members: Vec<Vec<Vec<usize>>>,
}

impl GroupAssignment {
    /// Assign every user a uniformly random arm per frequent context.
    pub fn uniform(
        frequent_contexts: &[usize],
        num_contexts: usize,
        num_users: usize,
        num_actions: usize,
        rng: &mut ChaCha8Rng,
    ) -> Self {
        let mut slot_of_context = vec![None; num_contexts];
        for (slot, &ctx) in frequent_contexts.iter().enumerate() {
            slot_of_context[ctx] = Some(slot);
        }
        let mut arm_of = Vec::with_capacity(frequent_contexts.len());
        let mut members = Vec::with_capacity(frequent_contexts.len());
        for _ in frequent_contexts {
            let arms: Vec<usize> = (0..num_users).map(|_| rng.gen_range(0..num_actions)).collect();
            let mut groups = vec![Vec::new(); num_actions];
            for (user, &arm) in arms.iter().enumerate() {
                groups[arm].push(user);
            }
            arm_of.push(arms);
            members.push(groups);
        }
        Self { contexts: frequent_contexts.to_vec(), slot_of_context, arm_of, members }
    }

    pub fn contexts(&self) -> &[usize] {
        &self.contexts
    }

    pub fn covers(&self, context: usize) -> bool {
        self.slot_of_context[context].is_some()
    }

    /// The arm this user plays in this context, if the context is covered.
    pub fn arm(&self, context: usize, user: usize) -> Option<usize> {
        self.slot_of_context[context].map(|slot| self.arm_of[slot][user])
    }

    /// Users assigned to (context, arm).
    pub fn group(&self, context: usize, arm: usize) -> &[usize] {
        let slot = self.slot_of_context[context].expect("context covered");
        &self.members[slot][arm]
    }

    /// Every user belongs to exactly one group per covered context.
    pub fn partition_is_complete(&self, num_users: usize) -> bool {
        self.members.iter().all(|groups| {
            let total: usize = groups.iter().map(Vec::len).sum();
            let mut seen = vec![false; num_users];
            for g in groups {
                for &u in g {
                    if seen[u] {
                        return false;
                    }
                    seen[u] = true;
                }
            }
            total == num_users
        })
    }
}

/// Output of a learning run.
#[derive(Debug, Clone)]
pub struct AlgoOutput {
    pub mu_hat: MuEstimate,
    pub policy: Policy<f64>,
    pub warnings: Vec<String>,
    pub diagnostics: Vec<(&'static str, f64)>,
}

/// Trim level for the recovery aggregation: saturates so trimming always
/// leaves a nonempty central slice (at alpha >= 1/4 it degenerates toward the
/// median).
pub(crate) fn saturated_trim_alpha(alpha: f64, n: usize) -> f64 {
    if n < 3 {
        return 0.0;
    }
    let cap = (n as f64 - 2.0) / (4.0 * n as f64);
    alpha.clamp(0.0, cap)
}

/// Corruption rate handed to the spectral filter (its precondition is
/// alpha < 1/3).
pub(crate) fn filter_alpha(alpha: f64) -> f64 {
    alpha.clamp(0.0, 0.32)
}

/// Agent that plays the assigned arm on covered contexts and uniform
/// elsewhere.
pub(crate) struct AssignmentAgent<'g> {
    assignment: &'g GroupAssignment,
    num_actions: usize,
    rng: ChaCha8Rng,
}

impl<'g> AssignmentAgent<'g> {
    pub(crate) fn new(assignment: &'g GroupAssignment, num_actions: usize, seed: u64) -> Self {
        Self { assignment, num_actions, rng: stream_rng(seed, "agent", 0) }
    }
}

impl Agent for AssignmentAgent<'_> {
    fn choose(&mut self, user: usize, context: usize, _log: &InteractionLog) -> usize {
        match self.assignment.arm(context, user) {
            Some(arm) => arm,
            None => self.rng.gen_range(0..self.num_actions),
        }
    }

    fn observe(&mut self, _user: usize, _context: usize, _action: usize, _reward: f64) {}
}

/// Greedy policy over an estimated table, ties to the lowest action index.
pub(crate) fn greedy_policy(table: &Table<f64>) -> Policy<f64> {
    Policy::Deterministic(
        (0..table.rows()).map(|s| crate::bandit::argmax_lowest(table.row(s))).collect(),
    )
}

pub(crate) fn episode_seed(seed: u64, phase: &str) -> u64 {
    stream_key(seed, phase, 0)
}

/// Effective corruption rate when users are scarce: max(SA / L, alpha).
pub fn effective_corruption(num_contexts: usize, num_actions: usize, num_users: usize, alpha: f64) -> f64 {
    ((num_contexts * num_actions) as f64 / num_users as f64).max(alpha)
}

pub(crate) fn per_user_mean_floor(num_users: usize, num_actions: usize, alpha: f64) -> Option<String> {
    if alpha <= 0.0 {
        return None;
    }
    let a = num_actions as f64;
    let needed = a * a.ln().max(1.0) / alpha;
    ((num_users as f64) < needed)
        .then(|| format!("L = {num_users} is below the recommended A log(A)/alpha = {needed:.0}"))
}
