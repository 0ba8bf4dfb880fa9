//! Experiment configuration: one TOML document whose keys mirror the
//! run/sweep parameters; CLI flags override file values.
//!
//! ```toml
//! schema = 1
//!
//! [instance]
//! contexts = 10
//! actions = 10
//! gap = 0.3
//! nu = "uniform"              # or { power_law = 1.0 } or { explicit = [...] }
//! noise = "bernoulli"         # or { truncated_gaussian = { variance = 0.25 } }
//!
//! [population]
//! users = 500
//! alpha = 0.2
//! attack = "boost"            # "boost" | "flip" | "honest" | { boost_fixed_context = 0 }
//! eps0 = 0.0
//!
//! [budget]
//! t0_over_l = 10
//! t_over_l = 30
//!
//! [[algorithms]]
//! name = "robust_mcb"         # robust_mcb | mab_baseline | highdim_baseline |
//! alpha_hat = 0.2             # naive_ucb | independent_ucb | corruption_robust_ucb
//!
//! [run]
//! replications = 50
//! master_seed = 20260809
//! output = "out/results.csv"
//! arrival = "round_robin"     # "round_robin" | "iid_uniform" | "block_shuffled"
//!
//! [sweep]                     # only consulted by the sweep subcommand
//! kind = "grid"               # "grid" | "effective_corruption" | "alpha_misspec"
//! parameter = "t_over_l"
//! values = [10, 20, 30, 40, 60]
//! ```

use serde::Deserialize;

use mcb_core::bandit::{NoiseKind, NuSpec};
use mcb_core::sim::ArrivalModel;

use crate::HarnessError;

pub const KNOWN_ALGORITHMS: &[&str] = &[
    "robust_mcb",
    "mab_baseline",
    "highdim_baseline",
    "naive_ucb",
    "independent_ucb",
    "corruption_robust_ucb",
];

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub schema: u32,
    pub instance: InstanceConfig,
    pub population: PopulationConfig,
    pub budget: BudgetConfig,
    pub algorithms: Vec<AlgorithmConfig>,
    pub run: RunConfig,
    #[serde(default)]
    pub sweep: Option<SweepConfig>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InstanceConfig {
    pub contexts: usize,
    pub actions: usize,
    pub gap: f64,
    #[serde(default)]
    pub nu: NuConfig,
    #[serde(default)]
    pub noise: NoiseConfig,
}

#[derive(Debug, Clone, Deserialize, Default)]
#[serde(untagged)]
pub enum NuConfig {
    #[default]
    #[serde(skip)]
    UniformDefault,
    Name(String),
    PowerLaw {
        power_law: f64,
    },
    Explicit {
        explicit: Vec<f64>,
    },
}

impl NuConfig {
    pub fn to_spec(&self) -> Result<NuSpec, HarnessError> {
        match self {
            NuConfig::UniformDefault => Ok(NuSpec::Uniform),
            NuConfig::Name(name) if name == "uniform" => Ok(NuSpec::Uniform),
            NuConfig::Name(other) => {
                Err(HarnessError::Config(format!("unknown nu spec {other:?}")))
            }
            NuConfig::PowerLaw { power_law } => Ok(NuSpec::PowerLaw { gamma: *power_law }),
            NuConfig::Explicit { explicit } => Ok(NuSpec::Explicit(explicit.clone())),
        }
    }
}

#[derive(Debug, Clone, Deserialize, Default)]
#[serde(untagged)]
pub enum NoiseConfig {
    #[default]
    #[serde(skip)]
    BernoulliDefault,
    Name(String),
    TruncatedGaussian {
        truncated_gaussian: GaussianParams,
    },
}

#[derive(Debug, Clone, Copy, Deserialize)]
pub struct GaussianParams {
    pub variance: f64,
}

impl NoiseConfig {
    pub fn to_kind(&self) -> Result<NoiseKind, HarnessError> {
        match self {
            NoiseConfig::BernoulliDefault => Ok(NoiseKind::Bernoulli),
            NoiseConfig::Name(name) if name == "bernoulli" => Ok(NoiseKind::Bernoulli),
            NoiseConfig::Name(other) => {
                Err(HarnessError::Config(format!("unknown noise {other:?}")))
            }
            NoiseConfig::TruncatedGaussian { truncated_gaussian } => {
                Ok(NoiseKind::TruncatedGaussian { variance: truncated_gaussian.variance })
            }
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PopulationConfig {
    pub users: usize,
    pub alpha: f64,
    #[serde(default)]
    pub attack: AttackConfig,
    #[serde(default)]
    pub eps0: f64,
}

#[derive(Debug, Clone, Deserialize, Default)]
#[serde(untagged)]
pub enum AttackConfig {
    #[default]
    #[serde(skip)]
    BoostDefault,
    Name(String),
    FixedContext {
        boost_fixed_context: usize,
    },
    Flip {
        flip: FlipSpec,
    },
}

#[derive(Debug, Clone, Copy, Deserialize)]
pub struct FlipSpec {
    pub reward_hi: f64,
    #[serde(default)]
    pub reward_lo: f64,
}

impl AttackConfig {
    pub fn tag(&self) -> Result<String, HarnessError> {
        match self {
            AttackConfig::BoostDefault => Ok("boost".into()),
            AttackConfig::Name(name) => match name.as_str() {
                "boost" | "flip" | "honest" => Ok(name.clone()),
                other => Err(HarnessError::Config(format!("unknown attack {other:?}"))),
            },
            AttackConfig::FixedContext { boost_fixed_context } => {
                Ok(format!("boost_fixed:{boost_fixed_context}"))
            }
            AttackConfig::Flip { flip } => Ok(format!("flip:{}:{}", flip.reward_hi, flip.reward_lo)),
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BudgetConfig {
    #[serde(default)]
    pub t0_over_l: usize,
    pub t_over_l: usize,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AlgorithmConfig {
    pub name: String,
    /// Corruption rate the algorithm assumes; defaults to the population's.
    #[serde(default)]
    pub alpha_hat: Option<f64>,
    /// Total-corruption tolerance for the layered UCB; defaults to sqrt(T).
    #[serde(default)]
    pub corruption_budget: Option<f64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub replications: usize,
    pub master_seed: u64,
    pub output: String,
    #[serde(default)]
    pub arrival: Option<String>,
    #[serde(default)]
    pub workers: Option<usize>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub kind: String,
    #[serde(default)]
    pub parameter: Option<String>,
    pub values: Vec<f64>,
    /// Assumed corruption rate pinned by the misspecification sweep.
    #[serde(default)]
    pub alpha_hat: Option<f64>,
}

pub const SWEEPABLE_PARAMETERS: &[&str] =
    &["t_over_l", "t0_over_l", "alpha", "users", "contexts", "actions", "eps0", "gap"];

pub fn parse_arrival(name: &str) -> Result<ArrivalModel, HarnessError> {
    match name {
        "round_robin" => Ok(ArrivalModel::RoundRobin),
        "iid_uniform" => Ok(ArrivalModel::IidUniform),
        "block_shuffled" => Ok(ArrivalModel::BlockShuffled),
        other => Err(HarnessError::Config(format!("unknown arrival model {other:?}"))),
    }
}

pub fn arrival_tag(model: ArrivalModel) -> &'static str {
    match model {
        ArrivalModel::RoundRobin => "round_robin",
        ArrivalModel::IidUniform => "iid_uniform",
        ArrivalModel::BlockShuffled => "block_shuffled",
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self, HarnessError> {
        let config: ExperimentConfig =
            toml::from_str(text).map_err(|e| HarnessError::Config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &std::path::Path) -> Result<Self, HarnessError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| HarnessError::Config(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        if self.schema != 1 {
            return Err(HarnessError::Config(format!("unknown schema {}", self.schema)));
        }
        if self.run.replications == 0 {
            return Err(HarnessError::Config("replications must be >= 1".into()));
        }
        if !(0.0..0.5).contains(&self.population.alpha) {
            return Err(HarnessError::Config("alpha must lie in [0, 1/2)".into()));
        }
        if self.algorithms.is_empty() {
            return Err(HarnessError::Config("need at least one algorithm".into()));
        }
        for algo in &self.algorithms {
            if !KNOWN_ALGORITHMS.contains(&algo.name.as_str()) {
                return Err(HarnessError::Config(format!(
                    "unknown algorithm {:?} (known: {})",
                    algo.name,
                    KNOWN_ALGORITHMS.join(", ")
                )));
            }
            if let Some(a) = algo.alpha_hat {
                if !(0.0..0.5).contains(&a) {
                    return Err(HarnessError::Config("alpha_hat must lie in [0, 1/2)".into()));
                }
            }
        }
        self.instance.nu.to_spec()?;
        self.instance.noise.to_kind()?;
        self.population.attack.tag()?;
        if let Some(arrival) = &self.run.arrival {
            parse_arrival(arrival)?;
        }
        if let Some(sweep) = &self.sweep {
            match sweep.kind.as_str() {
                "grid" => {
                    let param = sweep.parameter.as_deref().ok_or_else(|| {
                        HarnessError::Config("grid sweep needs a parameter".into())
                    })?;
                    if !SWEEPABLE_PARAMETERS.contains(&param) {
                        return Err(HarnessError::Config(format!(
                            "unknown sweep parameter {param:?} (known: {})",
                            SWEEPABLE_PARAMETERS.join(", ")
                        )));
                    }
                }
                "effective_corruption" | "alpha_misspec" => {}
                other => {
                    return Err(HarnessError::Config(format!("unknown sweep kind {other:?}")));
                }
            }
            if sweep.values.is_empty() {
                return Err(HarnessError::Config("sweep needs at least one value".into()));
            }
        }
        Ok(())
    }
}
