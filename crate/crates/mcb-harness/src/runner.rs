//! Sweep execution: resolve grid cells, run every algorithm x replication
//! with derived seeds, and collect long-format rows in canonical order
//! (grid x algorithm x replication) regardless of scheduling.

use rayon::prelude::*;

use mcb_core::algos::{
    self, effective_corruption, Env,
};
use mcb_core::bandit::{
    evaluate, instance_constant_k, make_instance, BanditInstance, NoiseKind, NuSpec,
};
use mcb_core::sim::rng::stream_key;
use mcb_core::sim::{perturb_population, AdversaryStrategy, ArrivalModel, BoostContexts, Population};

use crate::config::{arrival_tag, parse_arrival, ExperimentConfig, SweepConfig};
use crate::HarnessError;

/// One fully resolved grid cell.
#[derive(Debug, Clone)]
pub struct CellParams {
    pub contexts: usize,
    pub actions: usize,
    pub gap: f64,
    pub nu: NuSpec,
    pub noise: NoiseKind,
    pub users: usize,
    pub alpha: f64,
    pub attack: String,
    pub eps0: f64,
    pub t0: usize,
    pub t: usize,
    pub arrival: ArrivalModel,
}

/// One algorithm run on one cell and replication.
#[derive(Debug, Clone, PartialEq)]
pub struct RowRecord {
    pub sweep_param: String,
    pub sweep_value: f64,
    pub algorithm: String,
    pub contexts: usize,
    pub actions: usize,
    pub users: usize,
    pub alpha: f64,
    pub alpha_hat: f64,
    pub eps0: f64,
    pub attack: String,
    pub arrival: String,
    pub nu: String,
    pub noise: String,
    pub gap: f64,
    pub t0: usize,
    pub t: usize,
    pub budget: f64,
    pub replication: usize,
    pub seed: u64,
    pub suboptimality: f64,
    pub value: f64,
    pub k_b: f64,
    pub alpha_effective: f64,
    pub diagnostics: String,
    pub error: String,
}

#[derive(Debug, Clone)]
pub struct SweepResult {
    pub rows: Vec<RowRecord>,
}

pub fn nu_tag(nu: &NuSpec) -> String {
    match nu {
        NuSpec::Uniform => "uniform".into(),
        NuSpec::PowerLaw { gamma } => format!("power_law:{gamma}"),
        NuSpec::Explicit(weights) => {
            let parts: Vec<String> = weights.iter().map(|w| w.to_string()).collect();
            format!("explicit:{}", parts.join("|"))
        }
    }
}

pub fn parse_nu_tag(tag: &str) -> Result<NuSpec, HarnessError> {
    if tag == "uniform" {
        return Ok(NuSpec::Uniform);
    }
    if let Some(gamma) = tag.strip_prefix("power_law:") {
        let gamma: f64 =
            gamma.parse().map_err(|_| HarnessError::Config(format!("bad nu tag {tag:?}")))?;
        return Ok(NuSpec::PowerLaw { gamma });
    }
    if let Some(weights) = tag.strip_prefix("explicit:") {
        let parsed: Result<Vec<f64>, _> = weights.split('|').map(str::parse).collect();
        return Ok(NuSpec::Explicit(
            parsed.map_err(|_| HarnessError::Config(format!("bad nu tag {tag:?}")))?,
        ));
    }
    Err(HarnessError::Config(format!("bad nu tag {tag:?}")))
}

pub fn noise_tag(noise: NoiseKind) -> String {
    match noise {
        NoiseKind::Bernoulli => "bernoulli".into(),
        NoiseKind::TruncatedGaussian { variance } => format!("truncated_gaussian:{variance}"),
    }
}

pub fn parse_noise_tag(tag: &str) -> Result<NoiseKind, HarnessError> {
    if tag == "bernoulli" {
        return Ok(NoiseKind::Bernoulli);
    }
    if let Some(v) = tag.strip_prefix("truncated_gaussian:") {
        let variance: f64 =
            v.parse().map_err(|_| HarnessError::Config(format!("bad noise tag {tag:?}")))?;
        return Ok(NoiseKind::TruncatedGaussian { variance });
    }
    Err(HarnessError::Config(format!("bad noise tag {tag:?}")))
}

fn build_strategy(
    tag: &str,
    instance: &BanditInstance<f64>,
) -> Result<AdversaryStrategy, HarnessError> {
    match tag {
        "boost" => Ok(AdversaryStrategy::default_boost(instance)),
        "flip" => Ok(AdversaryStrategy::Flip { reward_hi: 1.0, reward_lo: 0.0 }),
        "honest" => Ok(AdversaryStrategy::Honest),
        other => {
            if let Some(params) = other.strip_prefix("flip:") {
                let mut parts = params.split(':');
                let hi: f64 = parts
                    .next()
                    .and_then(|v| v.parse().ok())
                    .ok_or_else(|| HarnessError::Config(format!("bad attack tag {other:?}")))?;
                let lo: f64 = match parts.next() {
                    Some(v) => v
                        .parse()
                        .map_err(|_| HarnessError::Config(format!("bad attack tag {other:?}")))?,
                    None => 0.0,
                };
                return Ok(AdversaryStrategy::Flip { reward_hi: hi, reward_lo: lo });
            }
            if let Some(ctx) = other.strip_prefix("boost_fixed:") {
                let context: usize = ctx
                    .parse()
                    .map_err(|_| HarnessError::Config(format!("bad attack tag {other:?}")))?;
                if let AdversaryStrategy::Boost { target, reward_hi, reward_lo, .. } =
                    AdversaryStrategy::default_boost(instance)
                {
                    Ok(AdversaryStrategy::Boost {
                        target,
                        reward_hi,
                        reward_lo,
                        contexts: BoostContexts::Fixed(context),
                    })
                } else {
                    unreachable!("default_boost builds a boost strategy")
                }
            } else {
                Err(HarnessError::Config(format!("unknown attack tag {other:?}")))
            }
        }
    }
}

/// Seed shared by every algorithm on the same (cell, replication): paired
/// comparisons see identical nature draws.
pub fn cell_seed(master_seed: u64, grid_index: usize, replication: usize) -> u64 {
    stream_key(master_seed, "cell", ((grid_index as u64) << 32) | replication as u64)
}

/// The specification of one algorithm run within a cell.
#[derive(Debug, Clone)]
pub struct AlgorithmSpec {
    pub name: String,
    pub alpha_hat: Option<f64>,
    pub corruption_budget: Option<f64>,
}

/// Run one algorithm on one cell. Algorithm failures land in the `error`
/// column instead of aborting the sweep.
pub fn run_row(
    cell: &CellParams,
    algo: &AlgorithmSpec,
    sweep_param: &str,
    sweep_value: f64,
    replication: usize,
    seed: u64,
) -> RowRecord {
    let alpha_hat = algo.alpha_hat.unwrap_or(cell.alpha);
    let budget = algo.corruption_budget.unwrap_or_else(|| (cell.t as f64).sqrt());
    let mut row = RowRecord {
        sweep_param: sweep_param.to_string(),
        sweep_value,
        algorithm: algo.name.clone(),
        contexts: cell.contexts,
        actions: cell.actions,
        users: cell.users,
        alpha: cell.alpha,
        alpha_hat,
        eps0: cell.eps0,
        attack: cell.attack.clone(),
        arrival: arrival_tag(cell.arrival).to_string(),
        nu: nu_tag(&cell.nu),
        noise: noise_tag(cell.noise),
        gap: cell.gap,
        t0: cell.t0,
        t: cell.t,
        budget,
        replication,
        seed,
        suboptimality: f64::NAN,
        value: f64::NAN,
        k_b: f64::NAN,
        alpha_effective: effective_corruption(cell.contexts, cell.actions, cell.users, cell.alpha),
        diagnostics: String::new(),
        error: String::new(),
    };
    match execute(cell, algo, alpha_hat, budget, seed) {
        Ok((suboptimality, value, k_b, diagnostics)) => {
            row.suboptimality = suboptimality;
            row.value = value;
            row.k_b = k_b;
            row.diagnostics = diagnostics;
        }
        Err(err) => {
            row.error = sanitize(&err);
        }
    }
    row
}

fn sanitize(text: &str) -> String {
    text.replace([',', '\n'], ";")
}

fn execute(
    cell: &CellParams,
    algo: &AlgorithmSpec,
    alpha_hat: f64,
    budget: f64,
    seed: u64,
) -> Result<(f64, f64, f64, String), String> {
    let instance_seed = stream_key(seed, "instance", 0);
    let instance: BanditInstance<f64> = make_instance(
        cell.contexts,
        cell.actions,
        cell.gap,
        &cell.nu,
        cell.noise,
        instance_seed,
    )
    .map_err(|e| e.to_string())?;
    let population = build_population(cell, &instance, seed).map_err(|e| e.to_string())?;
    let env = Env { instance: &instance, population: &population, arrival: cell.arrival };

    let output = match algo.name.as_str() {
        "robust_mcb" => algos::robust_mcb(&env, alpha_hat, cell.t0.max(1), cell.t, seed),
        "mab_baseline" => algos::mab_baseline(&env, alpha_hat, cell.t, seed),
        "highdim_baseline" => algos::highdim_baseline(&env, alpha_hat, cell.t, seed),
        "naive_ucb" => algos::naive_ucb(&env, cell.t, seed),
        "independent_ucb" => algos::independent_ucb(&env, cell.t, seed),
        "corruption_robust_ucb" => algos::corruption_robust_ucb(&env, budget, cell.t, seed),
        other => return Err(format!("unknown algorithm {other:?}")),
    }
    .map_err(|e| e.to_string())?;

    // Suboptimality is evaluated exactly on a good user's task (the shared
    // instance unless preferences were perturbed).
    let eval_instance = good_user_instance(&instance, &population, seed).map_err(|e| e.to_string())?;
    let report = evaluate(&eval_instance, &output.policy).map_err(|e| e.to_string())?;
    let k_b = instance_constant_k(&instance, cell.actions);

    let mut diag: Vec<String> =
        output.diagnostics.iter().map(|(k, v)| format!("{k}={v}")).collect();
    for w in &output.warnings {
        diag.push(format!("warn:{}", sanitize(w)));
    }
    Ok((report.suboptimality, report.value, k_b, diag.join(";")))
}

fn build_population(
    cell: &CellParams,
    instance: &BanditInstance<f64>,
    seed: u64,
) -> Result<Population, HarnessError> {
    let strategy = build_strategy(&cell.attack, instance)?;
    let population = if cell.eps0 > 0.0 {
        perturb_population(instance, cell.users, cell.alpha, cell.eps0, stream_key(seed, "perturb", 0))
            .map_err(|e| HarnessError::Config(e.to_string()))?
            .with_strategy(strategy)
    } else {
        Population::with_adversaries(cell.users, cell.alpha, strategy)
            .map_err(|e| HarnessError::Config(e.to_string()))?
    };
    Ok(population)
}

fn good_user_instance(
    instance: &BanditInstance<f64>,
    population: &Population,
    seed: u64,
) -> mcb_core::Result<BanditInstance<f64>> {
    if population.user_mu(0).is_none() {
        return Ok(instance.clone());
    }
    let good = population.good_users();
    let pick = (stream_key(seed, "eval-user", 0) % good.len() as u64) as usize;
    let user = good[pick];
    instance.with_mu(population.user_mu(user).expect("perturbed population").clone())
}

/// Apply a swept parameter value to the base cell.
fn apply_parameter(cell: &mut CellParams, parameter: &str, value: f64, users_base: usize) {
    match parameter {
        "t_over_l" => cell.t = (value * cell.users as f64).round() as usize,
        "t0_over_l" => cell.t0 = (value * cell.users as f64).round() as usize,
        "alpha" => cell.alpha = value,
        "users" => {
            let users = value.round() as usize;
            // Keep per-user budgets fixed when the population grows.
            let t_over_l = cell.t / users_base.max(1);
            let t0_over_l = cell.t0 / users_base.max(1);
            cell.users = users;
            cell.t = t_over_l * users;
            cell.t0 = t0_over_l * users;
        }
        "contexts" => cell.contexts = value.round() as usize,
        "actions" => cell.actions = value.round() as usize,
        "eps0" => cell.eps0 = value,
        "gap" => cell.gap = value,
        _ => unreachable!("validated parameter"),
    }
}

fn base_cell(config: &ExperimentConfig) -> Result<CellParams, HarnessError> {
    let arrival = match &config.run.arrival {
        Some(name) => parse_arrival(name)?,
        None => ArrivalModel::RoundRobin,
    };
    Ok(CellParams {
        contexts: config.instance.contexts,
        actions: config.instance.actions,
        gap: config.instance.gap,
        nu: config.instance.nu.to_spec()?,
        noise: config.instance.noise.to_kind()?,
        users: config.population.users,
        alpha: config.population.alpha,
        attack: config.population.attack.tag()?,
        eps0: config.population.eps0,
        t0: config.budget.t0_over_l * config.population.users,
        t: config.budget.t_over_l * config.population.users,
        arrival,
    })
}

fn grid_of(config: &ExperimentConfig, sweep: Option<&SweepConfig>) -> Result<Vec<(String, f64, CellParams)>, HarnessError> {
    let base = base_cell(config)?;
    let Some(sweep) = sweep else {
        return Ok(vec![(String::from("none"), 0.0, base)]);
    };
    let users_base = config.population.users;
    match sweep.kind.as_str() {
        "grid" => {
            let parameter = sweep.parameter.clone().expect("validated");
            Ok(sweep
                .values
                .iter()
                .map(|&v| {
                    let mut cell = base.clone();
                    apply_parameter(&mut cell, &parameter, v, users_base);
                    (parameter.clone(), v, cell)
                })
                .collect())
        }
        "effective_corruption" => Ok(sweep
            .values
            .iter()
            .map(|&v| {
                let mut cell = base.clone();
                apply_parameter(&mut cell, "users", v, users_base);
                ("users".to_string(), v, cell)
            })
            .collect()),
        "alpha_misspec" => Ok(sweep
            .values
            .iter()
            .map(|&v| {
                let mut cell = base.clone();
                apply_parameter(&mut cell, "alpha", v, users_base);
                ("alpha".to_string(), v, cell)
            })
            .collect()),
        _ => unreachable!("validated kind"),
    }
}

fn run_grid(
    config: &ExperimentConfig,
    grid: Vec<(String, f64, CellParams)>,
    force_alpha_hat: Option<f64>,
) -> SweepResult {
    let replications = config.run.replications;
    let algorithms: Vec<AlgorithmSpec> = config
        .algorithms
        .iter()
        .map(|a| AlgorithmSpec {
            name: a.name.clone(),
            alpha_hat: force_alpha_hat.or(a.alpha_hat),
            corruption_budget: a.corruption_budget,
        })
        .collect();

    // Canonical order: grid x algorithm x replication.
    let mut jobs = Vec::new();
    for (grid_index, (param, value, cell)) in grid.iter().enumerate() {
        for algo in &algorithms {
            for replication in 0..replications {
                let seed = cell_seed(config.run.master_seed, grid_index, replication);
                jobs.push((param.clone(), *value, cell.clone(), algo.clone(), replication, seed));
            }
        }
    }
    let rows: Vec<RowRecord> = jobs
        .into_par_iter()
        .map(|(param, value, cell, algo, replication, seed)| {
            run_row(&cell, &algo, &param, value, replication, seed)
        })
        .collect();
    SweepResult { rows }
}

/// One grid point (the config without its sweep section).
pub fn run_experiment(config: &ExperimentConfig) -> Result<SweepResult, HarnessError> {
    let grid = grid_of(config, None)?;
    Ok(run_grid(config, grid, None))
}

/// The sweep described by the config's `[sweep]` section.
pub fn run_sweep(config: &ExperimentConfig) -> Result<SweepResult, HarnessError> {
    let sweep = config
        .sweep
        .clone()
        .ok_or_else(|| HarnessError::Config("config has no [sweep] section".into()))?;
    let grid = grid_of(config, Some(&sweep))?;
    let force_alpha_hat = match sweep.kind.as_str() {
        "alpha_misspec" => Some(sweep.alpha_hat.unwrap_or(0.1)),
        _ => None,
    };
    Ok(run_grid(config, grid, force_alpha_hat))
}

/// Re-run a single recorded row from its own columns and compare bit-exactly.
pub fn replay_row(row: &RowRecord) -> Result<(RowRecord, bool), HarnessError> {
    let cell = CellParams {
        contexts: row.contexts,
        actions: row.actions,
        gap: row.gap,
        nu: parse_nu_tag(&row.nu)?,
        noise: parse_noise_tag(&row.noise)?,
        users: row.users,
        alpha: row.alpha,
        attack: row.attack.clone(),
        eps0: row.eps0,
        t0: row.t0,
        t: row.t,
        arrival: parse_arrival(&row.arrival)?,
    };
    let algo = AlgorithmSpec {
        name: row.algorithm.clone(),
        alpha_hat: Some(row.alpha_hat),
        corruption_budget: Some(row.budget),
    };
    let fresh = run_row(&cell, &algo, &row.sweep_param, row.sweep_value, row.replication, row.seed);
    let matches = bits_equal(fresh.suboptimality, row.suboptimality)
        && bits_equal(fresh.value, row.value)
        && fresh.error == row.error;
    Ok((fresh, matches))
}

fn bits_equal(a: f64, b: f64) -> bool {
    a.to_bits() == b.to_bits()
}
