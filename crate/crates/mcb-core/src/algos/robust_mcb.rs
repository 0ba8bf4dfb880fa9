//! The combined robust learner: estimate the context distribution with a
//! rescaled high-dimensional pass, split contexts into a frequent set handled
//! by per-group trimmed means and a tail handled by one spectral filter, and
//! return the greedy policy of the recovered score table.

use super::{
    episode_seed, filter_alpha, greedy_policy, saturated_trim_alpha, AlgoOutput, AssignmentAgent,
    ContextScale, Env, GroupAssignment, MuEstimate, Provenance,
};
use crate::bandit::{Policy, Table};
use crate::error::{Error, Result};
use crate::estimators::{robust_mean_highdim, sample_size_adequate, trimmed_mean_with};
use crate::sim::rng::stream_rng;
use crate::sim::{run_episode, FixedPolicyAgent};

/// Covariance-bound multiplier for the rescaled user vectors handed to the
/// spectral filter (the per-coordinate variance is L/T0 or A*L/T up to the
/// equalizer factor, which stays within a factor 4).
const COV_SCALE: f64 = 4.0;

/// Context-distribution estimate plus the scales that equalize per-context
/// variances downstream.
#[derive(Debug, Clone)]
pub struct NuEstimate {
    pub nu_hat: Vec<f64>,
    pub scale: ContextScale,
    pub filter_iterations: usize,
    pub filter_removed: f64,
    pub warnings: Vec<String>,
}

/// Pre-phase: observe T0 arrivals playing a fixed action, build per-user
/// rescaled context-frequency vectors, run the spectral filter over users,
/// undo the scaling, clamp to the simplex and renormalize.
pub fn estimate_nu(env: &Env, alpha_hat: f64, t0: usize, seed: u64) -> Result<NuEstimate> {
    let (s, l) = (env.num_contexts(), env.num_users());
    let mut warnings = Vec::new();
    if !sample_size_adequate(l, s, alpha_hat) {
        warnings.push(format!("L = {l} below the recommended S log(S)/alpha for S = {s}"));
    }

    // "Play any action": a fixed arm keeps the phase deterministic.
    let mut agent = FixedPolicyAgent::new(Policy::Deterministic(vec![0; s]), seed);
    let log = run_episode(
        env.instance,
        env.population,
        env.arrival,
        &mut agent,
        t0,
        episode_seed(seed, "estimate-nu"),
    )?;
    let scale = ContextScale::from_counts(log.context_counts(), t0);

    if s == 1 {
        return Ok(NuEstimate {
            nu_hat: vec![1.0],
            scale,
            filter_iterations: 0,
            filter_removed: 0.0,
            warnings,
        });
    }

    let mut vectors = vec![vec![0.0f64; s]; l];
    for rec in log.records() {
        vectors[rec.user][rec.context] += 1.0 / scale.sigma(rec.context);
    }
    for (user, v) in vectors.iter_mut().enumerate() {
        let n_i = log.user_counts()[user];
        if n_i == 0 {
            return Err(Error::NoInteractions { user });
        }
        for x in v.iter_mut() {
            *x /= n_i as f64;
        }
    }

    let sigma_sq = COV_SCALE * l as f64 / t0 as f64;
    let est = robust_mean_highdim(&vectors, filter_alpha(alpha_hat), sigma_sq)?;

    let mut nu_hat: Vec<f64> = est
        .estimate
        .iter()
        .enumerate()
        .map(|(ctx, &b)| (scale.sigma(ctx) * b).max(0.0))
        .collect();
    let total: f64 = nu_hat.iter().sum();
    if total <= 0.0 {
        return Err(Error::InvalidParameter("context estimate collapsed to zero mass".into()));
    }
    for p in &mut nu_hat {
        *p /= total;
    }
    Ok(NuEstimate {
        nu_hat,
        scale,
        filter_iterations: est.iterations,
        filter_removed: est.removed_fraction,
        warnings,
    })
}

pub fn robust_mcb(
    env: &Env,
    alpha_hat: f64,
    t0: usize,
    horizon: usize,
    seed: u64,
) -> Result<AlgoOutput> {
    robust_mcb_impl(env, alpha_hat, t0, horizon, seed, None)
}

/// Test hook: run the pipeline with the true context distribution driving the
/// frequent-context selection (the pre-phase still supplies the scales).
pub fn robust_mcb_with_known_nu(
    env: &Env,
    alpha_hat: f64,
    t0: usize,
    horizon: usize,
    seed: u64,
    known_nu: &[f64],
) -> Result<AlgoOutput> {
    robust_mcb_impl(env, alpha_hat, t0, horizon, seed, Some(known_nu))
}

fn robust_mcb_impl(
    env: &Env,
    alpha_hat: f64,
    t0: usize,
    horizon: usize,
    seed: u64,
    known_nu: Option<&[f64]>,
) -> Result<AlgoOutput> {
    let (s, a, l) = (env.num_contexts(), env.num_actions(), env.num_users());
    let nu_est = estimate_nu(env, alpha_hat, t0, seed)?;
    let mut warnings = nu_est.warnings.clone();
    if !sample_size_adequate(l, s * a, alpha_hat) {
        warnings.push(format!(
            "L = {l} below the recommended SA log(SA)/alpha for SA = {}",
            s * a
        ));
    }

    // Frequent set: the min(S, A) contexts with the largest estimated mass,
    // ties to the lower context index.
    let ranking_nu = known_nu.unwrap_or(&nu_est.nu_hat);
    let mut order: Vec<usize> = (0..s).collect();
    order.sort_by(|&i, &j| ranking_nu[j].partial_cmp(&ranking_nu[i]).unwrap().then(i.cmp(&j)));
    let mut frequent: Vec<usize> = order[..s.min(a)].to_vec();
    frequent.sort_unstable();
    let tail: Vec<usize> = (0..s).filter(|ctx| !frequent.contains(ctx)).collect();

    let mut assignment_rng = stream_rng(seed, "assignment", 0);
    let assignment = GroupAssignment::uniform(&frequent, s, l, a, &mut assignment_rng);
    let mut agent = AssignmentAgent::new(&assignment, a, seed);
    let log = run_episode(
        env.instance,
        env.population,
        env.arrival,
        &mut agent,
        horizon,
        episode_seed(seed, "robust-mcb"),
    )?;

    let scale = &nu_est.scale;
    let mut table = Table::filled(s, a, 0.0);
    let mut provenance = vec![Provenance::Univariate; s * a];

    // Frequent contexts: per-user rescaled reward mass, trimmed per group.
    let mut sums = vec![0.0f64; l * s];
    for rec in log.records() {
        if assignment.covers(rec.context) {
            sums[rec.user * s + rec.context] += rec.reward;
        }
    }
    for &ctx in &frequent {
        let inv_sigma = 1.0 / scale.sigma(ctx);
        for arm in 0..a {
            let samples: Vec<f64> = assignment
                .group(ctx, arm)
                .iter()
                .filter(|&&u| log.user_counts()[u] > 0)
                .map(|&u| sums[u * s + ctx] * inv_sigma / log.user_counts()[u] as f64)
                .collect();
            if samples.is_empty() {
                return Err(Error::EmptyGroup { context: ctx, action: arm });
            }
            let b_hat = if samples.len() == 1 {
                samples[0]
            } else {
                let trim = saturated_trim_alpha(alpha_hat, samples.len());
                trimmed_mean_with(&samples, trim, 2.0)?.estimate
            };
            table.set(ctx, arm, inv_sigma * b_hat);
        }
    }

    // Tail contexts: one spectral filter over per-user rescaled reward
    // vectors restricted to tail cells.
    let mut diagnostics = vec![
        ("t0", t0 as f64),
        ("t", horizon as f64),
        ("nu_filter_iterations", nu_est.filter_iterations as f64),
        ("nu_filter_removed", nu_est.filter_removed),
    ];
    if !tail.is_empty() {
        let tail_slot: Vec<Option<usize>> = {
            let mut slots = vec![None; s];
            for (i, &ctx) in tail.iter().enumerate() {
                slots[ctx] = Some(i);
            }
            slots
        };
        let d = tail.len() * a;
        let mut vectors = vec![vec![0.0f64; d]; l];
        for rec in log.records() {
            if let Some(slot) = tail_slot[rec.context] {
                vectors[rec.user][slot * a + rec.action] +=
                    rec.reward / scale.sigma(rec.context);
            }
        }
        for (user, v) in vectors.iter_mut().enumerate() {
            let n_i = log.user_counts()[user];
            if n_i == 0 {
                return Err(Error::NoInteractions { user });
            }
            let mult = a as f64 / n_i as f64;
            for x in v.iter_mut() {
                *x *= mult;
            }
        }
        let sigma_sq = COV_SCALE * a as f64 * l as f64 / horizon as f64;
        let est = robust_mean_highdim(&vectors, filter_alpha(alpha_hat), sigma_sq)?;
        for (slot, &ctx) in tail.iter().enumerate() {
            let inv_sigma = 1.0 / scale.sigma(ctx);
            for arm in 0..a {
                table.set(ctx, arm, inv_sigma * est.estimate[slot * a + arm]);
                provenance[ctx * a + arm] = Provenance::HighDim;
            }
        }
        diagnostics.push(("tail_filter_iterations", est.iterations as f64));
        diagnostics.push(("tail_filter_removed", est.removed_fraction));
        diagnostics.push(("tail_spectral_bound", est.spectral_bound.unwrap_or(0.0)));
    }

    let policy = greedy_policy(&table);
    Ok(AlgoOutput {
        mu_hat: MuEstimate {
            table,
            provenance,
            scales: scale.sigma_sq.iter().map(|v| v.sqrt()).collect(),
        },
        policy,
        warnings,
        diagnostics,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bandit::{make_instance, NoiseKind, NuSpec};
    use crate::sim::episode::ArrivalModel;
    use crate::sim::{AdversaryStrategy, BoostContexts, Population};

    #[test]
    fn single_context_nu_is_trivial() {
        let instance =
            make_instance(1, 3, 0.3, &NuSpec::Uniform, NoiseKind::Bernoulli, 1).unwrap();
        let population = Population::all_good(10);
        let env = Env { instance: &instance, population: &population, arrival: ArrivalModel::RoundRobin };
        let est = estimate_nu(&env, 0.1, 50, 3).unwrap();
        assert_eq!(est.nu_hat, vec![1.0]);
    }

    #[test]
    fn clean_nu_estimate_is_close_in_l1() {
        let instance =
            make_instance(10, 3, 0.3, &NuSpec::Uniform, NoiseKind::Bernoulli, 5).unwrap();
        let l = 100;
        let population = Population::all_good(l);
        let env = Env { instance: &instance, population: &population, arrival: ArrivalModel::IidUniform };
        let mut ok = 0;
        for seed in 0..20u64 {
            let est = estimate_nu(&env, 0.0, 50 * l, seed).unwrap();
            let l1: f64 = est
                .nu_hat
                .iter()
                .zip(instance.nu())
                .map(|(a, b)| (a - b).abs())
                .sum();
            if l1 <= 0.1 {
                ok += 1;
            }
        }
        assert!(ok >= 18, "only {ok}/20 seeds inside the band");
    }

    #[test]
    fn context_pinning_attack_is_filtered() {
        // Adversaries all report context 0; the filtered estimate stays close
        // while the raw empirical frequency is off by about alpha there.
        let instance =
            make_instance(10, 3, 0.3, &NuSpec::Uniform, NoiseKind::Bernoulli, 5).unwrap();
        let l = 150;
        let alpha = 0.2;
        let strategy = AdversaryStrategy::Boost {
            target: vec![0; 10],
            reward_hi: 1.0,
            reward_lo: 0.0,
            contexts: BoostContexts::Fixed(0),
        };
        let population = Population::with_adversaries(l, alpha, strategy).unwrap();
        let env = Env { instance: &instance, population: &population, arrival: ArrivalModel::IidUniform };
        let t0 = 100 * l;
        let est = estimate_nu(&env, alpha, t0, 11).unwrap();
        let l1: f64 = est.nu_hat.iter().zip(instance.nu()).map(|(a, b)| (a - b).abs()).sum();
        assert!(l1 <= 0.15, "filtered l1 error {l1}");
        assert!(est.filter_removed > 0.0);

        // The naive frequency at context 0 absorbs the full attack mass.
        let mut agent = FixedPolicyAgent::new(Policy::Deterministic(vec![0; 10]), 11);
        let log = run_episode(&instance, &population, ArrivalModel::IidUniform, &mut agent, t0, episode_seed(11, "estimate-nu")).unwrap();
        let naive0 = log.context_counts()[0] as f64 / t0 as f64;
        assert!((naive0 - instance.nu()[0]).abs() >= alpha * 0.9 * (1.0 - instance.nu()[0]));
    }

    #[test]
    fn frequent_set_has_min_s_a_contexts_and_partitions() {
        let instance = make_instance(
            12,
            4,
            0.3,
            &NuSpec::PowerLaw { gamma: 1.0 },
            NoiseKind::Bernoulli,
            7,
        )
        .unwrap();
        let population = Population::all_good(60);
        let env = Env { instance: &instance, population: &population, arrival: ArrivalModel::RoundRobin };
        let out = robust_mcb(&env, 0.1, 5 * 60, 20 * 60, 3).unwrap();
        let univariate: Vec<usize> = (0..12)
            .filter(|&ctx| out.mu_hat.provenance_at(ctx, 0) == Provenance::Univariate)
            .collect();
        let highdim: Vec<usize> = (0..12)
            .filter(|&ctx| out.mu_hat.provenance_at(ctx, 0) == Provenance::HighDim)
            .collect();
        assert_eq!(univariate.len(), 4);
        assert_eq!(univariate.len() + highdim.len(), 12);
        // Power-law mass concentrates on the lowest indices.
        assert_eq!(univariate, vec![0, 1, 2, 3]);
    }

    #[test]
    fn provenance_routes_are_disjoint() {
        let instance =
            make_instance(6, 3, 0.3, &NuSpec::Uniform, NoiseKind::Bernoulli, 9).unwrap();
        let population = Population::all_good(80);
        let env = Env { instance: &instance, population: &population, arrival: ArrivalModel::RoundRobin };
        let out = robust_mcb(&env, 0.1, 5 * 80, 10 * 80, 5).unwrap();
        for ctx in 0..6 {
            let first = out.mu_hat.provenance_at(ctx, 0);
            for arm in 1..3 {
                assert_eq!(out.mu_hat.provenance_at(ctx, arm), first);
            }
        }
    }
}
