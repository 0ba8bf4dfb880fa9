//! Property tests for the task model: exact-evaluation algebra, generator
//! invariants and serialization round trips on randomized instances.

use mcb_core::bandit::{
    evaluate, instance_constant_k, make_instance, optimal_policy, value, BanditInstance,
    NoiseKind, NuSpec, Policy, Table,
};
use proptest::prelude::*;

fn arb_instance() -> impl Strategy<Value = BanditInstance<f64>> {
    (2usize..6, 2usize..5, 1u64..500, 0.05f64..0.9).prop_map(|(s, a, seed, gap)| {
        make_instance(s, a, gap, &NuSpec::PowerLaw { gamma: 0.7 }, NoiseKind::Bernoulli, seed)
            .unwrap()
    })
}

proptest! {
    #[test]
    fn value_is_linear_in_the_policy(instance in arb_instance(), lambda in 0.0f64..1.0, seed in 0u64..1000) {
        use rand::Rng;
        let mut rng = mcb_core::sim::rng::stream_rng(seed, "prop", 0);
        let a = instance.num_actions();
        let p = Policy::Deterministic((0..instance.num_contexts()).map(|_| rng.gen_range(0..a)).collect());
        let q = Policy::Deterministic((0..instance.num_contexts()).map(|_| rng.gen_range(0..a)).collect());
        let blend = p.blend(&q, lambda, a).unwrap();
        let lhs = value(&instance, &blend).unwrap();
        let rhs = lambda * value(&instance, &p).unwrap() + (1.0 - lambda) * value(&instance, &q).unwrap();
        prop_assert!((lhs - rhs).abs() <= 1e-12);
    }

    #[test]
    fn instance_constant_ignores_labels(instance in arb_instance(), cut in 0usize..8, rotate in 1usize..4) {
        let s = instance.num_contexts();
        let shift = rotate % s;
        let mut nu = instance.nu().to_vec();
        nu.rotate_left(shift);
        let mut rows = instance.mu().to_rows();
        rows.rotate_left(shift);
        let permuted = BanditInstance::new(nu, Table::from_rows(rows).unwrap(), NoiseKind::Bernoulli).unwrap();
        let a = instance_constant_k(&instance, cut);
        let b = instance_constant_k(&permuted, cut);
        prop_assert!((a - b).abs() <= 1e-12);
    }

    #[test]
    fn greedy_dominates_and_reports_consistently(instance in arb_instance(), seed in 0u64..1000) {
        use rand::Rng;
        let mut rng = mcb_core::sim::rng::stream_rng(seed, "prop2", 0);
        let a = instance.num_actions();
        let p = Policy::Deterministic((0..instance.num_contexts()).map(|_| rng.gen_range(0..a)).collect());
        let report = evaluate(&instance, &p).unwrap();
        prop_assert!(report.suboptimality >= -1e-12);
        prop_assert!(report.optimal_value >= report.value - 1e-12);
        let opt = value(&instance, &optimal_policy(&instance)).unwrap();
        prop_assert!((report.optimal_value - opt).abs() <= 1e-15);
    }

    #[test]
    fn instance_toml_round_trips(instance in arb_instance()) {
        let text = instance.to_toml().unwrap();
        let back = BanditInstance::from_toml(&text).unwrap();
        prop_assert_eq!(&instance, &back);
        prop_assert_eq!(text, back.to_toml().unwrap());
    }
}

/// Exhaustive optimality for every instance shape with S * A <= 12.
#[test]
fn optimal_policy_matches_exhaustive_search_at_all_small_shapes() {
    for (s, a) in [(1usize, 12usize), (2, 6), (3, 4), (4, 3), (6, 2), (12, 1), (2, 5), (3, 3)] {
        for seed in 0..5u64 {
            let instance: BanditInstance<f64> =
                make_instance(s, a, 0.4, &NuSpec::Uniform, NoiseKind::Bernoulli, 77 + seed)
                    .unwrap();
            let opt = value(&instance, &optimal_policy(&instance)).unwrap();
            let mut best = f64::MIN;
            let mut code = vec![0usize; s];
            loop {
                best = best.max(value(&instance, &Policy::Deterministic(code.clone())).unwrap());
                let mut idx = 0;
                loop {
                    if idx == s {
                        break;
                    }
                    code[idx] += 1;
                    if code[idx] < a {
                        break;
                    }
                    code[idx] = 0;
                    idx += 1;
                }
                if idx == s {
                    break;
                }
            }
            assert!((opt - best).abs() <= 1e-12, "S={s} A={a} seed={seed}");
        }
    }
}

/// The greedy-policy value-error chain for uniform contexts:
/// V* - V(greedy of any table) <= (2 / sqrt(S)) ||mu - table||_2.
#[test]
fn greedy_value_gap_bounded_by_table_error() {
    use rand::Rng;
    let instance: BanditInstance<f64> =
        make_instance(9, 4, 0.3, &NuSpec::Uniform, NoiseKind::Bernoulli, 5).unwrap();
    let opt = value(&instance, &optimal_policy(&instance)).unwrap();
    let mut rng = mcb_core::sim::rng::stream_rng(8, "chain", 0);
    for _ in 0..1000 {
        let rows: Vec<Vec<f64>> = (0..9)
            .map(|s| (0..4).map(|a| instance.mean(s, a) + rng.gen_range(-0.6..0.6)).collect())
            .collect();
        let table = Table::from_rows(rows).unwrap();
        let greedy = Policy::Deterministic(
            (0..9).map(|s| mcb_core::bandit::argmax_lowest(table.row(s))).collect(),
        );
        let err: f64 = instance
            .mu()
            .as_slice()
            .iter()
            .zip(table.as_slice())
            .map(|(m, e)| (m - e) * (m - e))
            .sum::<f64>()
            .sqrt();
        let gap = opt - value(&instance, &greedy).unwrap();
        assert!(gap <= 2.0 / 3.0 * err + 1e-12, "gap {gap} vs bound {}", 2.0 / 3.0 * err);
    }
}

/// The numeric kernels are scalar-generic: the same instance evaluated at f32
/// agrees with f64 to single precision.
#[test]
fn value_kernels_instantiate_at_f32() {
    let f64_instance: BanditInstance<f64> =
        make_instance(4, 3, 0.3, &NuSpec::PowerLaw { gamma: 1.0 }, NoiseKind::Bernoulli, 9)
            .unwrap();
    let f32_instance: BanditInstance<f32> =
        make_instance(4, 3, 0.3, &NuSpec::PowerLaw { gamma: 1.0 }, NoiseKind::Bernoulli, 9)
            .unwrap();
    let p64 = optimal_policy(&f64_instance);
    let p32 = optimal_policy(&f32_instance);
    assert_eq!(p64.action(0), p32.action(0));
    let v64 = value(&f64_instance, &p64).unwrap();
    let v32 = value(&f32_instance, &p32).unwrap();
    assert!((v64 - v32 as f64).abs() < 1e-6);
    let k64 = instance_constant_k(&f64_instance, 2);
    let k32 = instance_constant_k(&f32_instance, 2);
    assert!((k64 - k32 as f64).abs() < 1e-6);
}
