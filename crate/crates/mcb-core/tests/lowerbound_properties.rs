//! Statistical properties of the tape law and the indistinguishable systems
//! that go beyond the exact per-class checks.

use mcb_core::lowerbound::{build_e_n, eps_for_target_n, tv_mixture};
use mcb_core::sim::rng::stream_rng;

/// Within a weight class every sequence is equiprobable: over many sampled
/// tapes, each position carries ones at the same rate (chi-square across
/// positions, conditioned on the class).
#[test]
fn tapes_are_exchangeable_within_weight_classes() {
    let n = 12;
    let law = build_e_n::<f64>(n, 0.3, 0.004, 50).unwrap();
    let mut rng = stream_rng(11, "exchangeable", 0);
    let draws = 30_000;
    let mut position_ones = vec![0u64; n];
    let mut total_ones = 0u64;
    for _ in 0..draws {
        let tape = law.sample_tape(&mut rng);
        for (pos, &bit) in tape.iter().enumerate() {
            position_ones[pos] += u64::from(bit);
            total_ones += u64::from(bit);
        }
    }
    // Exchangeability makes every position's expected count total/n.
    let expected = total_ones as f64 / n as f64;
    let chi2: f64 =
        position_ones.iter().map(|&o| (o as f64 - expected).powi(2) / expected).sum();
    // 1% critical value for 11 degrees of freedom.
    assert!(chi2 <= 24.7, "position chi-square {chi2:.1} (counts {position_ones:?})");
}

/// The sampled class frequencies match the law's class masses.
#[test]
fn tape_weights_follow_class_masses() {
    let n = 10;
    let law = build_e_n::<f64>(n, 0.25, 0.0, 30).unwrap();
    let mut rng = stream_rng(3, "classes", 0);
    let draws = 40_000usize;
    let mut counts = vec![0u64; n + 1];
    for _ in 0..draws {
        let tape = law.sample_tape(&mut rng);
        counts[tape.iter().filter(|&&b| b == 1).count()] += 1;
    }
    for k in 0..=n {
        let expected = law.class_mass(k) * draws as f64;
        if expected < 5.0 {
            continue;
        }
        let sd = (expected * (1.0 - law.class_mass(k))).sqrt();
        let observed = counts[k] as f64;
        assert!(
            (observed - expected).abs() <= 4.0 * sd,
            "class {k}: observed {observed}, expected {expected:.1}"
        );
    }
}

/// Monotonicity of the exact distance in the tape length at fixed bias, on a
/// grid that crosses the truncation onset.
#[test]
fn tv_nondecreasing_in_tape_length() {
    for (alpha, l) in [(0.2f64, 20usize), (0.3, 20)] {
        let eps = eps_for_target_n(alpha, l, 64);
        let mut last = -1.0;
        for n in [8usize, 16, 24, 32, 40, 48, 56, 64] {
            let tv = tv_mixture::<f64>(n, alpha, eps, l).unwrap();
            assert!(
                tv >= last - 1e-18,
                "alpha={alpha} L={l}: tv fell from {last:.3e} to {tv:.3e} at n={n}"
            );
            last = tv;
        }
        assert!(last > 0.0, "grid never reached the truncated regime");
    }
}

/// The truncated fair-coin tail obeys the Hoeffding budget across a wide
/// parameter sweep, not just the acceptance grid.
#[test]
fn fair_tail_stays_under_hoeffding_budget() {
    for l in [2usize, 5, 20, 100, 400] {
        for n in [8usize, 33, 64, 129, 400] {
            let law = build_e_n::<f64>(n, 0.25, 0.0, l).unwrap();
            let tail = law.fair_coin_outside_mass();
            let budget = (l as f64).powi(8).recip();
            assert!(
                tail <= budget,
                "tail {tail:.3e} above 1/L^8 {budget:.3e} at n={n} L={l}"
            );
        }
    }
}
