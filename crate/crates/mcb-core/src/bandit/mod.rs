//! The shared task: contexts, actions, context distribution, mean-reward
//! table and reward noise, together with exact policy evaluation.

mod io;

pub use io::InstanceDoc;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::sim::rng::stream_rng;

/// Tolerance for probability-vector and tie checks.
const PROB_TOL: f64 = 1e-12;

/// Dense S x A table in row-major order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Table<R> {
    rows: usize,
    cols: usize,
    data: Vec<R>,
}

impl<R: Real> Table<R> {
    pub fn from_rows(rows: Vec<Vec<R>>) -> Result<Self> {
        let nrows = rows.len();
        if nrows == 0 {
            return Err(Error::InvalidParameter("table needs at least one row".into()));
        }
        let ncols = rows[0].len();
        if ncols == 0 || rows.iter().any(|r| r.len() != ncols) {
            return Err(Error::DimensionMismatch("ragged or empty table rows".into()));
        }
        Ok(Self { rows: nrows, cols: ncols, data: rows.into_iter().flatten().collect() })
    }

    pub fn filled(rows: usize, cols: usize, value: R) -> Self {
        Self { rows, cols, data: vec![value; rows * cols] }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, r: usize, c: usize) -> R {
        self.data[r * self.cols + c]
    }

    pub fn set(&mut self, r: usize, c: usize, value: R) {
        self.data[r * self.cols + c] = value;
    }

    pub fn row(&self, r: usize) -> &[R] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn as_slice(&self) -> &[R] {
        &self.data
    }

    pub fn to_rows(&self) -> Vec<Vec<R>> {
        (0..self.rows).map(|r| self.row(r).to_vec()).collect()
    }
}

/// Reward noise law. Means must stay in the legal range for the law.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseKind {
    /// Rewards in {0, 1}; requires means in [0, 1].
    Bernoulli,
    /// Gaussian with the given variance, clamped symmetrically at three
    /// standard deviations around the mean (keeps the mean exact and the
    /// variance below the parameter).
    TruncatedGaussian { variance: f64 },
}

impl NoiseKind {
    pub fn variance_bound(&self) -> f64 {
        match self {
            NoiseKind::Bernoulli => 0.25,
            NoiseKind::TruncatedGaussian { variance } => *variance,
        }
    }
}

/// The shared bandit task: S contexts drawn from `nu`, A actions, an S x A
/// mean-reward table and a reward noise law.
#[derive(Debug, Clone, PartialEq)]
pub struct BanditInstance<R> {
    num_contexts: usize,
    num_actions: usize,
    nu: Vec<R>,
    mu: Table<R>,
    noise: NoiseKind,
    seed: Option<u64>,
}

impl<R: Real> BanditInstance<R> {
    pub fn new(nu: Vec<R>, mu: Table<R>, noise: NoiseKind) -> Result<Self> {
        let s = nu.len();
        if s == 0 {
            return Err(Error::InvalidParameter("need at least one context".into()));
        }
        if mu.rows() != s {
            return Err(Error::DimensionMismatch(format!(
                "mu has {} rows but nu has {} contexts",
                mu.rows(),
                s
            )));
        }
        let one = R::one();
        let total: R = nu.iter().copied().sum();
        if (total - one).abs().to_f64().unwrap() > PROB_TOL {
            return Err(Error::InvalidParameter(format!("nu sums to {total}, not 1")));
        }
        if nu.iter().any(|&p| p < R::zero()) {
            return Err(Error::InvalidParameter("nu has a negative entry".into()));
        }
        if mu.as_slice().iter().any(|&m| !m.is_finite() || m.abs() > one + R::approx(PROB_TOL)) {
            return Err(Error::InvalidParameter("means must satisfy |mu(s,a)| <= 1".into()));
        }
        match noise {
            NoiseKind::Bernoulli => {
                if mu.as_slice().iter().any(|&m| m < -R::approx(PROB_TOL) || m > one + R::approx(PROB_TOL)) {
                    return Err(Error::InvalidParameter(
                        "Bernoulli rewards require means in [0, 1]".into(),
                    ));
                }
            }
            NoiseKind::TruncatedGaussian { variance } => {
                if !(0.0..=1.0).contains(&variance) {
                    return Err(Error::InvalidParameter(
                        "reward noise variance must lie in [0, 1]".into(),
                    ));
                }
            }
        }
        Ok(Self { num_contexts: s, num_actions: mu.cols(), nu, mu, noise, seed: None })
    }

    pub fn num_contexts(&self) -> usize {
        self.num_contexts
    }

    pub fn num_actions(&self) -> usize {
        self.num_actions
    }

    pub fn nu(&self) -> &[R] {
        &self.nu
    }

    pub fn mu(&self) -> &Table<R> {
        &self.mu
    }

    pub fn mean(&self, context: usize, action: usize) -> R {
        self.mu.get(context, action)
    }

    pub fn noise(&self) -> NoiseKind {
        self.noise
    }

    pub fn seed(&self) -> Option<u64> {
        self.seed
    }

    /// Same task with a different mean table (used for per-user perturbations).
    pub fn with_mu(&self, mu: Table<R>) -> Result<Self> {
        Self::new(self.nu.clone(), mu, self.noise)
    }

    /// Legal mean range under the instance's noise law.
    pub fn mean_range(&self) -> (R, R) {
        match self.noise {
            NoiseKind::Bernoulli => (R::zero(), R::one()),
            NoiseKind::TruncatedGaussian { .. } => (-R::one(), R::one()),
        }
    }
}

/// A policy: deterministic context -> action, or per-context action
/// distributions.
#[derive(Debug, Clone, PartialEq)]
pub enum Policy<R> {
    Deterministic(Vec<usize>),
    Stochastic(Vec<Vec<R>>),
}

impl<R: Real> Policy<R> {
    pub fn deterministic(actions: Vec<usize>, num_actions: usize) -> Result<Self> {
        if actions.iter().any(|&a| a >= num_actions) {
            return Err(Error::InvalidParameter(format!(
                "deterministic action index out of range (A = {num_actions})"
            )));
        }
        Ok(Policy::Deterministic(actions))
    }

    pub fn stochastic(rows: Vec<Vec<R>>) -> Result<Self> {
        for row in &rows {
            if row.is_empty() {
                return Err(Error::InvalidParameter("empty policy row".into()));
            }
            let total: R = row.iter().copied().sum();
            if (total - R::one()).abs().to_f64().unwrap() > PROB_TOL
                || row.iter().any(|&p| p < R::zero())
            {
                return Err(Error::InvalidParameter("stochastic rows must sum to 1".into()));
            }
        }
        Ok(Policy::Stochastic(rows))
    }

    pub fn num_contexts(&self) -> usize {
        match self {
            Policy::Deterministic(v) => v.len(),
            Policy::Stochastic(rows) => rows.len(),
        }
    }

    /// Probability of `action` under `context`.
    pub fn prob(&self, context: usize, action: usize) -> R {
        match self {
            Policy::Deterministic(v) => {
                if v[context] == action {
                    R::one()
                } else {
                    R::zero()
                }
            }
            Policy::Stochastic(rows) => rows[context][action],
        }
    }

    /// The action a deterministic policy plays in `context`.
    pub fn action(&self, context: usize) -> Option<usize> {
        match self {
            Policy::Deterministic(v) => Some(v[context]),
            Policy::Stochastic(_) => None,
        }
    }

    /// Convex combination `lambda * self + (1 - lambda) * other`.
    pub fn blend(&self, other: &Policy<R>, lambda: R, num_actions: usize) -> Result<Policy<R>> {
        if self.num_contexts() != other.num_contexts() {
            return Err(Error::DimensionMismatch("policies cover different context counts".into()));
        }
        let rows = (0..self.num_contexts())
            .map(|s| {
                (0..num_actions)
                    .map(|a| lambda * self.prob(s, a) + (R::one() - lambda) * other.prob(s, a))
                    .collect()
            })
            .collect();
        Policy::stochastic(rows)
    }
}

/// Exact value and suboptimality of a policy on an instance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ValueReport<R> {
    pub value: R,
    pub optimal_value: R,
    pub suboptimality: R,
}

fn check_dims<R: Real>(instance: &BanditInstance<R>, policy: &Policy<R>) -> Result<()> {
    if policy.num_contexts() != instance.num_contexts() {
        return Err(Error::DimensionMismatch(format!(
            "policy has {} contexts, instance has {}",
            policy.num_contexts(),
            instance.num_contexts()
        )));
    }
    if let Policy::Stochastic(rows) = policy {
        if rows.iter().any(|r| r.len() != instance.num_actions()) {
            return Err(Error::DimensionMismatch("policy row width != A".into()));
        }
    }
    if let Policy::Deterministic(v) = policy {
        if v.iter().any(|&a| a >= instance.num_actions()) {
            return Err(Error::DimensionMismatch("policy action index >= A".into()));
        }
    }
    Ok(())
}

/// Exact expected reward of `policy` on `instance`:
/// sum_s nu(s) sum_a pi(a|s) mu(s,a).
pub fn value<R: Real>(instance: &BanditInstance<R>, policy: &Policy<R>) -> Result<R> {
    check_dims(instance, policy)?;
    let mut total = R::zero();
    for s in 0..instance.num_contexts() {
        let inner = match policy {
            Policy::Deterministic(v) => instance.mean(s, v[s]),
            Policy::Stochastic(rows) => rows[s]
                .iter()
                .enumerate()
                .map(|(a, &p)| p * instance.mean(s, a))
                .sum(),
        };
        total += instance.nu[s] * inner;
    }
    Ok(total)
}

/// Greedy deterministic policy; argmax ties broken by the lowest action index.
pub fn optimal_policy<R: Real>(instance: &BanditInstance<R>) -> Policy<R> {
    let actions = (0..instance.num_contexts())
        .map(|s| argmax_lowest(instance.mu.row(s)))
        .collect();
    Policy::Deterministic(actions)
}

/// First index attaining the maximum.
pub fn argmax_lowest<R: Real>(row: &[R]) -> usize {
    let mut best = 0;
    for (i, &v) in row.iter().enumerate().skip(1) {
        if v > row[best] {
            best = i;
        }
    }
    best
}

/// Value, optimal value and suboptimality in one report.
pub fn evaluate<R: Real>(instance: &BanditInstance<R>, policy: &Policy<R>) -> Result<ValueReport<R>> {
    let v = value(instance, policy)?;
    let opt = value(instance, &optimal_policy(instance))?;
    Ok(ValueReport { value: v, optimal_value: opt, suboptimality: opt - v })
}

/// How the context distribution of a generated instance is formed.
#[derive(Debug, Clone, PartialEq)]
pub enum NuSpec {
    Uniform,
    /// nu(s_[j]) proportional to 1 / j^(1 + gamma), gamma > 0.
    PowerLaw { gamma: f64 },
    /// Accepted unnormalized; normalized on ingestion.
    Explicit(Vec<f64>),
}

impl NuSpec {
    fn build<R: Real>(&self, s: usize) -> Result<Vec<R>> {
        let weights: Vec<f64> = match self {
            NuSpec::Uniform => vec![1.0; s],
            NuSpec::PowerLaw { gamma } => {
                if *gamma <= 0.0 {
                    return Err(Error::InvalidParameter("power-law gamma must be > 0".into()));
                }
                (1..=s).map(|j| 1.0 / (j as f64).powf(1.0 + gamma)).collect()
            }
            NuSpec::Explicit(w) => {
                if w.len() != s {
                    return Err(Error::DimensionMismatch(format!(
                        "explicit nu has {} entries, expected {}",
                        w.len(),
                        s
                    )));
                }
                if w.iter().any(|&x| x < 0.0 || !x.is_finite()) {
                    return Err(Error::InvalidParameter("explicit nu entries must be >= 0".into()));
                }
                w.clone()
            }
        };
        let total: f64 = weights.iter().sum();
        if total <= 0.0 {
            return Err(Error::InvalidParameter("nu weights sum to zero".into()));
        }
        Ok(weights.into_iter().map(|w| R::approx(w / total)).collect())
    }
}

/// Generate a random experiment instance: per context, one uniformly chosen
/// optimal arm at `base + gap` and all other arms at `base`, with the base
/// level chosen so every mean is legal under the noise law.
pub fn make_instance<R: Real>(
    num_contexts: usize,
    num_actions: usize,
    gap: f64,
    nu_spec: &NuSpec,
    noise: NoiseKind,
    seed: u64,
) -> Result<BanditInstance<R>> {
    if !(gap > 0.0 && gap <= 1.0) {
        return Err(Error::InvalidParameter(format!("gap must lie in (0, 1], got {gap}")));
    }
    if num_contexts == 0 || num_actions == 0 {
        return Err(Error::InvalidParameter("need S >= 1 and A >= 1".into()));
    }
    let nu = nu_spec.build::<R>(num_contexts)?;
    // Centered so both base and base + gap stay inside [0, 1].
    let base = 0.5 - gap / 2.0;
    let mut rng: ChaCha8Rng = stream_rng(seed, "instance", 0);
    let mut mu = Table::filled(num_contexts, num_actions, R::approx(base));
    for s in 0..num_contexts {
        let best = rng.gen_range(0..num_actions);
        mu.set(s, best, R::approx(base + gap));
    }
    let mut instance = BanditInstance::new(nu, mu, noise)?;
    instance.seed = Some(seed);
    Ok(instance)
}

/// Instance constant combining the root-mass of the `a_cut` most frequent
/// contexts with the residual tail mass:
/// sum_{j<=min(a_cut,S)} sqrt(nu_[j]) + sqrt(sum_{j>a_cut} nu_[j] * a_cut).
pub fn instance_constant_k<R: Real>(instance: &BanditInstance<R>, a_cut: usize) -> R {
    let mut sorted: Vec<R> = instance.nu.to_vec();
    sorted.sort_by(|a, b| b.partial_cmp(a).unwrap());
    let head = a_cut.min(sorted.len());
    let head_sum: R = sorted[..head].iter().map(|&p| p.sqrt()).collect::<Vec<_>>().into_iter().sum();
    let tail_mass: R = sorted[head..].iter().copied().sum();
    head_sum + (tail_mass * R::from_count(a_cut)).sqrt()
}
