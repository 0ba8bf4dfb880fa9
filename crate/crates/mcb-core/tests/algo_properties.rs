//! Monte Carlo contracts for the learners: the sample-complexity claims of
//! the warm-up procedures, agreement between the combined learner and the
//! grouping baseline when every context is frequent, the frequent-context
//! advantage under heavy-tailed context laws, and the known-distribution
//! smoke test.

use mcb_core::algos::{
    estimate_nu, highdim_baseline, mab_baseline, robust_mcb, robust_mcb_with_known_nu, Env,
};
use mcb_core::bandit::{evaluate, instance_constant_k, make_instance, NoiseKind, NuSpec};
use mcb_core::sim::{AdversaryStrategy, ArrivalModel, Population};

fn boosted_env(
    instance: &mcb_core::Instance,
    users: usize,
    alpha: f64,
) -> (Population, ArrivalModel) {
    let population =
        Population::with_adversaries(users, alpha, AdversaryStrategy::default_boost(instance))
            .unwrap();
    (population, ArrivalModel::RoundRobin)
}

/// Few contexts, many arms: after T/L = O(alpha / eps^2) per-user steps the
/// returned policy is eps-close in at least 90% of seeds despite the attack.
#[test]
fn mab_baseline_hits_the_per_user_budget_contract() {
    let (users, alpha, eps) = (200usize, 0.2f64, 0.1f64);
    let t_over_l = (3.0 * alpha / (eps * eps)).ceil() as usize; // 60
    let mut hits = 0;
    for seed in 0..50u64 {
        let instance =
            make_instance(1, 5, 0.3, &NuSpec::Uniform, NoiseKind::Bernoulli, 400 + seed).unwrap();
        let (population, arrival) = boosted_env(&instance, users, alpha);
        let env = Env { instance: &instance, population: &population, arrival };
        let out = mab_baseline(&env, alpha, t_over_l * users, seed).unwrap();
        if evaluate(&instance, &out.policy).unwrap().suboptimality <= eps {
            hits += 1;
        }
    }
    assert!(hits >= 45, "eps-optimal in only {hits}/50 seeds");
}

/// Many contexts, few arms: uniform play plus one spectral estimate reaches
/// eps = 0.15 within T/L = O(alpha A / eps^2) in at least 80% of seeds.
#[test]
fn highdim_baseline_hits_the_per_user_budget_contract() {
    let (users, alpha, eps) = (1000usize, 0.1f64, 0.15f64);
    let t_over_l = (alpha * 5.0 / (eps * eps)).ceil() as usize; // 23
    let mut hits = 0;
    for seed in 0..50u64 {
        let instance =
            make_instance(20, 5, 0.3, &NuSpec::Uniform, NoiseKind::Bernoulli, 500 + seed)
                .unwrap();
        let (population, arrival) = boosted_env(&instance, users, alpha);
        let env = Env { instance: &instance, population: &population, arrival };
        let out = highdim_baseline(&env, alpha, t_over_l * users, seed).unwrap();
        if evaluate(&instance, &out.policy).unwrap().suboptimality <= eps {
            hits += 1;
        }
    }
    assert!(hits >= 40, "eps-optimal in only {hits}/50 seeds");
}

/// When every context is frequent (S <= A) the combined learner reduces to
/// the grouping baseline's structure; their paired suboptimality means agree
/// within a factor two plus one-flip noise.
#[test]
fn robust_mcb_matches_mab_baseline_when_all_contexts_are_frequent() {
    let (users, alpha, t_over_l) = (240usize, 0.2f64, 40usize);
    let mut mcb_total = 0.0;
    let mut mab_total = 0.0;
    let reps = 20u64;
    for seed in 0..reps {
        let instance =
            make_instance(4, 6, 0.3, &NuSpec::Uniform, NoiseKind::Bernoulli, 600 + seed).unwrap();
        let (population, arrival) = boosted_env(&instance, users, alpha);
        let env = Env { instance: &instance, population: &population, arrival };
        let mcb = robust_mcb(&env, alpha, 10 * users, t_over_l * users, seed).unwrap();
        let mab = mab_baseline(&env, alpha, t_over_l * users, seed).unwrap();
        assert!(mcb.mu_hat.provenance.iter().all(|p| *p == mcb_core::algos::Provenance::Univariate));
        mcb_total += evaluate(&instance, &mcb.policy).unwrap().suboptimality;
        mab_total += evaluate(&instance, &mab.policy).unwrap().suboptimality;
    }
    let (mcb_mean, mab_mean) = (mcb_total / reps as f64, mab_total / reps as f64);
    // One context flip in one replication moves a mean by gap/(S*reps).
    let floor = 0.3 / (4.0 * reps as f64) * 2.0;
    assert!(
        mcb_mean <= 2.0 * mab_mean + floor,
        "combined learner {mcb_mean:.4} vs baseline {mab_mean:.4}"
    );
}

/// Heavy-tailed context laws concentrate the mass on the frequent set, so at
/// equal budgets the power-law instance is no harder than the uniform one
/// beyond the instance-constant ratio (with half again slack).
#[test]
fn power_law_contexts_are_no_harder_than_the_constant_predicts() {
    let (users, alpha, t_over_l) = (500usize, 0.2f64, 30usize);
    let (mut uniform_total, mut power_total) = (0.0, 0.0);
    let mut k_ratio = 0.0;
    let reps = 30u64;
    for seed in 0..reps {
        let uniform =
            make_instance(10, 10, 0.3, &NuSpec::Uniform, NoiseKind::Bernoulli, 700 + seed)
                .unwrap();
        let power = make_instance(
            10,
            10,
            0.3,
            &NuSpec::PowerLaw { gamma: 1.0 },
            NoiseKind::Bernoulli,
            700 + seed,
        )
        .unwrap();
        k_ratio = instance_constant_k(&power, 10) / instance_constant_k(&uniform, 10);
        for (instance, total) in
            [(&uniform, &mut uniform_total), (&power, &mut power_total)]
        {
            let (population, arrival) = boosted_env(instance, users, alpha);
            let env = Env { instance, population: &population, arrival };
            let out = robust_mcb(&env, alpha, 10 * users, t_over_l * users, seed).unwrap();
            *total += evaluate(instance, &out.policy).unwrap().suboptimality;
        }
    }
    let ratio = power_total / uniform_total;
    assert!(
        ratio <= 1.5 * k_ratio,
        "power-law/uniform suboptimality ratio {ratio:.3} vs K-ratio {k_ratio:.3}"
    );
}

/// Monotonicity smoke test: handing the learner the true context distribution
/// (instead of its estimate) can only help up to the estimate's l1 error.
#[test]
fn known_context_distribution_changes_little() {
    let (users, alpha, t_over_l) = (400usize, 0.2f64, 30usize);
    let reps = 20u64;
    let mut with_estimate = Vec::new();
    let mut with_truth = Vec::new();
    let mut l1_total = 0.0;
    for seed in 0..reps {
        let instance = make_instance(
            12,
            4,
            0.3,
            &NuSpec::PowerLaw { gamma: 1.0 },
            NoiseKind::Bernoulli,
            800 + seed,
        )
        .unwrap();
        let (population, arrival) = boosted_env(&instance, users, alpha);
        let env = Env { instance: &instance, population: &population, arrival };
        let estimated = robust_mcb(&env, alpha, 10 * users, t_over_l * users, seed).unwrap();
        let known = robust_mcb_with_known_nu(
            &env,
            alpha,
            10 * users,
            t_over_l * users,
            seed,
            instance.nu(),
        )
        .unwrap();
        with_estimate.push(evaluate(&instance, &estimated.policy).unwrap().suboptimality);
        with_truth.push(evaluate(&instance, &known.policy).unwrap().suboptimality);
        // The same seed reproduces the estimate the learner used internally.
        let nu_est = estimate_nu(&env, alpha, 10 * users, seed).unwrap();
        l1_total += nu_est
            .nu_hat
            .iter()
            .zip(instance.nu())
            .map(|(p, q)| (p - q).abs())
            .sum::<f64>();
    }
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    let se = |v: &[f64]| {
        let m = mean(v);
        (v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (v.len() as f64 - 1.0)
            / v.len() as f64)
            .sqrt()
    };
    let gap = mean(&with_estimate) - mean(&with_truth);
    let band = l1_total / reps as f64 + 3.0 * (se(&with_estimate) + se(&with_truth));
    assert!(
        gap <= band,
        "estimate-driven run worse by {gap:.4}, beyond the l1 + noise band {band:.4}"
    );
}
