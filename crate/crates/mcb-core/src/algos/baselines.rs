//! The two warm-up learners: per-context grouping with trimmed-mean
//! aggregation (few contexts), and uniform play with one high-dimensional
//! robust estimate over all users (few actions, uniform contexts).

use super::{
    episode_seed, filter_alpha, greedy_policy, per_user_mean_floor, saturated_trim_alpha,
    AlgoOutput, AssignmentAgent, Env, GroupAssignment, MuEstimate, Provenance,
};
use crate::bandit::{BanditInstance, Table};
use crate::error::{Error, Result};
use crate::estimators::{robust_mean_highdim, sample_size_adequate, trimmed_mean_with};
use crate::sim::rng::stream_rng;
use crate::sim::{run_episode, UniformAgent};

/// Group the users into A arms per context, play the assigned arm, then take
/// the trimmed mean of the per-user empirical means inside every
/// (context, arm) group.
pub fn mab_baseline(env: &Env, alpha_hat: f64, horizon: usize, seed: u64) -> Result<AlgoOutput> {
    let (s, a, l) = (env.num_contexts(), env.num_actions(), env.num_users());
    let mut warnings = Vec::new();
    if let Some(w) = per_user_mean_floor(l, a, alpha_hat) {
        warnings.push(w);
    }

    let all_contexts: Vec<usize> = (0..s).collect();
    let mut assignment_rng = stream_rng(seed, "assignment", 0);
    let assignment = GroupAssignment::uniform(&all_contexts, s, l, a, &mut assignment_rng);
    let mut agent = AssignmentAgent::new(&assignment, a, seed);
    let log = run_episode(
        env.instance,
        env.population,
        env.arrival,
        &mut agent,
        horizon,
        episode_seed(seed, "mab-baseline"),
    )?;

    // Per-user empirical means in each context (each user plays one arm there).
    let mut sums = vec![0.0f64; l * s];
    let mut counts = vec![0usize; l * s];
    for rec in log.records() {
        sums[rec.user * s + rec.context] += rec.reward;
        counts[rec.user * s + rec.context] += 1;
    }

    let mut table = Table::filled(s, a, 0.0);
    for ctx in 0..s {
        for arm in 0..a {
            let samples: Vec<f64> = assignment
                .group(ctx, arm)
                .iter()
                .filter(|&&u| counts[u * s + ctx] > 0)
                .map(|&u| sums[u * s + ctx] / counts[u * s + ctx] as f64)
                .collect();
            if samples.is_empty() {
                return Err(Error::EmptyGroup { context: ctx, action: arm });
            }
            let estimate = if samples.len() == 1 {
                samples[0]
            } else {
                let trim = saturated_trim_alpha(alpha_hat, samples.len());
                trimmed_mean_with(&samples, trim, 2.0)?.estimate
            };
            table.set(ctx, arm, estimate);
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
        warnings,
        diagnostics: vec![("t", horizon as f64)],
    })
}

/// Play uniformly at random, form each user's rescaled empirical reward
/// vector over all (context, action) cells, and hand the collection to the
/// spectral filter with the per-step covariance bound SA * L / T.
pub fn highdim_baseline(env: &Env, alpha_hat: f64, horizon: usize, seed: u64) -> Result<AlgoOutput> {
    let (s, a, l) = (env.num_contexts(), env.num_actions(), env.num_users());
    let d = s * a;
    let mut warnings = Vec::new();
    if !sample_size_adequate(l, d, alpha_hat) {
        warnings.push(format!("L = {l} is below the recommended d log(d)/alpha for d = {d}"));
    }

    let mut agent = UniformAgent::new(a, seed);
    let log = run_episode(
        env.instance,
        env.population,
        env.arrival,
        &mut agent,
        horizon,
        episode_seed(seed, "highdim-baseline"),
    )?;

    let mut vectors = vec![vec![0.0f64; d]; l];
    for rec in log.records() {
        vectors[rec.user][rec.context * a + rec.action] += rec.reward;
    }
    for (user, v) in vectors.iter_mut().enumerate() {
        let n_i = log.user_counts()[user];
        if n_i == 0 {
            return Err(Error::NoInteractions { user });
        }
        let scale = d as f64 / n_i as f64;
        for x in v.iter_mut() {
            *x *= scale;
        }
    }

    let sigma_sq = d as f64 * l as f64 / horizon as f64;
    let est = robust_mean_highdim(&vectors, filter_alpha(alpha_hat), sigma_sq)?;
    let table = Table::from_rows(
        (0..s).map(|ctx| est.estimate[ctx * a..(ctx + 1) * a].to_vec()).collect(),
    )?;
    let policy = greedy_policy(&table);
    Ok(AlgoOutput {
        mu_hat: MuEstimate {
            table,
            provenance: vec![Provenance::HighDim; d],
            scales: vec![1.0; s],
        },
        policy,
        warnings,
        diagnostics: vec![
            ("t", horizon as f64),
            ("filter_iterations", est.iterations as f64),
            ("filter_removed", est.removed_fraction),
            ("spectral_bound", est.spectral_bound.unwrap_or(0.0)),
        ],
    })
}

/// Value-error certificate for a greedy policy built from `table`, valid for
/// uniform contexts: (2 / sqrt(S)) * ||mu - table||_2. Test mode: needs the
/// true means.
pub fn value_error_certificate(instance: &BanditInstance<f64>, table: &Table<f64>) -> f64 {
    let diff: f64 = instance
        .mu()
        .as_slice()
        .iter()
        .zip(table.as_slice())
        .map(|(&m, &e)| (m - e) * (m - e))
        .sum();
    2.0 / (instance.num_contexts() as f64).sqrt() * diff.sqrt()
}
