//! The adversary's reward-tape law: a distribution over length-n bit
//! sequences that makes an alpha-corrupted population of eps-biased coins
//! look like fair coins.
//!
//! Densities depend only on the Hamming weight, so the law is represented by
//! per-weight-class masses. All arithmetic runs in log space, which keeps the
//! construction exact for n in the thousands; sampling a tape draws a weight
//! class and then a uniform permutation of that many ones.

use rand::seq::SliceRandom;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Per-weight-class law over {0,1}^n with truncation outside the balanced
/// band |ones - zeros| <= delta_max = 4 sqrt(n ln L).
#[derive(Debug, Clone)]
pub struct WeightLawE<R> {
    n: usize,
    alpha: R,
    eps: R,
    num_users: usize,
    delta_max: R,
    /// Normalizer of the truncated difference density.
    z: R,
    /// Normalized class masses (sum to 1).
    class_mass: Vec<R>,
    in_regime: bool,
}

/// log(1 - exp(r)) for r <= 0, stable near both ends.
fn log1mexp<R: Real>(r: R) -> R {
    let ln2 = R::approx(std::f64::consts::LN_2);
    if r < -ln2 {
        (-r.exp()).ln_1p()
    } else {
        (-r.exp_m1()).ln()
    }
}

/// logsumexp with Neumaier-compensated accumulation.
fn log_sum_exp<R: Real>(values: &[R]) -> R {
    let max = values.iter().copied().fold(R::neg_infinity(), R::max);
    if max == R::neg_infinity() {
        return R::neg_infinity();
    }
    let mut sum = R::zero();
    let mut comp = R::zero();
    for &v in values {
        let term = (v - max).exp();
        let t = sum + term;
        comp += if sum.abs() >= term.abs() { (sum - t) + term } else { (term - t) + sum };
        sum = t;
    }
    max + (sum + comp).ln()
}

/// ln of binomial coefficients C(n, 0..=n), accumulated incrementally.
fn ln_binomials<R: Real>(n: usize) -> Vec<R> {
    let mut out = Vec::with_capacity(n + 1);
    let mut acc = R::zero();
    out.push(acc);
    for k in 0..n {
        acc = acc + R::from_count(n - k).ln() - R::from_count(k + 1).ln();
        out.push(acc);
    }
    out
}

impl<R: Real> WeightLawE<R> {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn alpha(&self) -> R {
        self.alpha
    }

    pub fn eps(&self) -> R {
        self.eps
    }

    pub fn num_users(&self) -> usize {
        self.num_users
    }

    pub fn delta_max(&self) -> R {
        self.delta_max
    }

    pub fn z(&self) -> R {
        self.z
    }

    /// Whether the parameters satisfy n <= 0.01 alpha^2 / (eps^2 ln L).
    pub fn in_regime(&self) -> bool {
        self.in_regime
    }

    /// Probability of the whole weight-k class.
    pub fn class_mass(&self, k: usize) -> R {
        self.class_mass[k]
    }

    pub fn class_masses(&self) -> &[R] {
        &self.class_mass
    }

    pub fn total_mass(&self) -> R {
        self.class_mass.iter().copied().sum()
    }

    /// Whether weight class k lies inside the balanced band.
    pub fn in_band(&self, k: usize) -> bool {
        let delta = R::from_count(2 * k) - R::from_count(self.n);
        delta.abs() <= self.delta_max
    }

    /// Exact fair-coin mass outside the band (the Hoeffding-controlled tail).
    pub fn fair_coin_outside_mass(&self) -> R {
        let ln_c = ln_binomials::<R>(self.n);
        let ln_half = -R::from_count(self.n) * R::approx(std::f64::consts::LN_2);
        let terms: Vec<R> = (0..=self.n)
            .filter(|&k| !self.in_band(k))
            .map(|k| ln_c[k] + ln_half)
            .collect();
        if terms.is_empty() {
            R::zero()
        } else {
            log_sum_exp(&terms).exp()
        }
    }

    /// Draw one reward tape: sample a weight class, then place that many ones
    /// uniformly at random.
    pub fn sample_tape(&self, rng: &mut ChaCha8Rng) -> Vec<u8> {
        use rand::Rng;
        let u: f64 = rng.gen();
        let mut acc = 0.0;
        let mut weight = self.n;
        for (k, &mass) in self.class_mass.iter().enumerate() {
            acc += mass.to_f64().unwrap();
            if u < acc {
                weight = k;
                break;
            }
        }
        let mut tape = vec![0u8; self.n];
        for slot in tape.iter_mut().take(weight) {
            *slot = 1;
        }
        tape.shuffle(rng);
        tape
    }
}

/// log of (1 - alpha) * P_{biased}(e_k) / P_{fair}(e_k) for a weight-k
/// sequence: ln(1-alpha) + k ln(1+2eps) + (n-k) ln(1-2eps).
fn log_density_ratio<R: Real>(n: usize, k: usize, alpha: R, eps: R) -> R {
    let two_eps = R::approx(2.0) * eps;
    (R::one() - alpha).ln() + R::from_count(k) * two_eps.ln_1p()
        + R::from_count(n - k) * (-two_eps).ln_1p()
}

/// Build the tape law. Errors if any in-band class density turns negative
/// (parameters outside the construction's regime make the defining difference
/// density invalid; clamping would silently void the certificate).
pub fn build_e_n<R: Real>(n: usize, alpha: R, eps: R, num_users: usize) -> Result<WeightLawE<R>> {
    let (a, e) = (alpha.to_f64().unwrap(), eps.to_f64().unwrap());
    if !(0.0..0.5).contains(&a) || a == 0.0 {
        return Err(Error::InvalidParameter(format!("alpha must lie in (0, 1/2), got {a}")));
    }
    if !(0.0..0.5).contains(&e) {
        return Err(Error::InvalidParameter(format!("eps must lie in [0, 1/2), got {e}")));
    }
    if n == 0 || num_users < 2 {
        return Err(Error::InvalidParameter("need n >= 1 and L >= 2".into()));
    }
    let ln_l = R::approx((num_users as f64).ln());
    let delta_max = R::approx(4.0) * (R::from_count(n) * ln_l).sqrt();
    let in_regime = e == 0.0
        || (n as f64) <= 0.01 * a * a / (e * e * (num_users as f64).ln());

    let ln_c = ln_binomials::<R>(n);
    let ln_half = -R::from_count(n) * R::approx(std::f64::consts::LN_2);
    let mut log_unnorm = vec![R::neg_infinity(); n + 1];
    for (k, slot) in log_unnorm.iter_mut().enumerate() {
        let delta = R::from_count(2 * k) - R::from_count(n);
        if delta.abs() > delta_max {
            continue;
        }
        let r = log_density_ratio(n, k, alpha, eps);
        if r > R::zero() {
            return Err(Error::NegativeDensity { weight: k, n, alpha: a, eps: e });
        }
        // Class mass of the difference density: C(n,k) 2^-n (1 - e^r).
        *slot = ln_c[k] + ln_half + log1mexp(r);
    }

    // Z = (1/alpha) * sum of in-band difference masses. Summing the band
    // directly costs a few ulps around 1; the complement over the truncated
    // tail gives Z = 1 + ((1-alpha) B_out - F_out) / alpha at full precision
    // (exactly 1 when nothing is truncated).
    let finite: Vec<R> = log_unnorm.iter().copied().filter(|v| *v > R::neg_infinity()).collect();
    if finite.is_empty() {
        return Err(Error::InvalidParameter(
            "empty balanced band: every weight class was truncated".into(),
        ));
    }
    let log_z_alpha = log_sum_exp(&finite);
    let (fair_out, biased_scaled_out) = tail_masses(n, alpha, eps, &ln_c, ln_half, delta_max);
    let z = R::one() + (biased_scaled_out - fair_out) / alpha;
    let class_mass: Vec<R> = log_unnorm.iter().map(|&lu| (lu - log_z_alpha).exp()).collect();

    Ok(WeightLawE {
        n,
        alpha,
        eps,
        num_users,
        delta_max,
        z,
        class_mass,
        in_regime,
    })
}

/// Exact total-variation distance between the fair-coin product law and the
/// mixture (1 - alpha) * biased product + alpha * tape law, assembled per
/// weight class in log space.
pub fn tv_mixture<R: Real>(n: usize, alpha: R, eps: R, num_users: usize) -> Result<R> {
    let law = build_e_n(n, alpha, eps, num_users)?;
    Ok(tv_of_law(&law))
}

pub fn tv_of_law<R: Real>(law: &WeightLawE<R>) -> R {
    let n = law.n;
    let ln_c = ln_binomials::<R>(n);
    let ln_half = -R::from_count(n) * R::approx(std::f64::consts::LN_2);
    // In-band, every per-sequence gap is (1 - 1/Z) times the difference
    // density, so the in-band contribution telescopes to |Z alpha - alpha| =
    // |(1-alpha) B_out - F_out|; the band never needs to be summed. Outside,
    // the gap is the raw difference of the two product laws. Everything is a
    // tail quantity, so the distance comes out exact-to-ulps (and exactly
    // zero when nothing is truncated).
    let (fair_out, biased_scaled_out) = tail_masses(n, law.alpha, law.eps, &ln_c, ln_half, law.delta_max);
    let in_band_contribution = (biased_scaled_out - fair_out).abs();

    let mut out_terms: Vec<R> = Vec::new();
    for k in 0..=n {
        if law.in_band(k) {
            continue;
        }
        let r = log_density_ratio(n, k, law.alpha, law.eps);
        let log_abs_gap = if r <= R::zero() { log1mexp(r) } else { r + log1mexp(-r) };
        out_terms.push(ln_c[k] + ln_half + log_abs_gap);
    }
    let out_contribution =
        if out_terms.is_empty() { R::zero() } else { log_sum_exp(&out_terms).exp() };
    (in_band_contribution + out_contribution) / R::approx(2.0)
}

/// (fair mass, (1-alpha)-scaled biased mass) outside the balanced band.
fn tail_masses<R: Real>(
    n: usize,
    alpha: R,
    eps: R,
    ln_c: &[R],
    ln_half: R,
    delta_max: R,
) -> (R, R) {
    let mut fair_terms = Vec::new();
    let mut biased_terms = Vec::new();
    for (k, &lnck) in ln_c.iter().enumerate() {
        let delta = R::from_count(2 * k) - R::from_count(n);
        if delta.abs() <= delta_max {
            continue;
        }
        let ln_fair = lnck + ln_half;
        fair_terms.push(ln_fair);
        biased_terms.push(ln_fair + log_density_ratio(n, k, alpha, eps));
    }
    let fair = if fair_terms.is_empty() { R::zero() } else { log_sum_exp(&fair_terms).exp() };
    let biased =
        if biased_terms.is_empty() { R::zero() } else { log_sum_exp(&biased_terms).exp() };
    (fair, biased)
}

/// eps placed so that floor(0.01 alpha^2 / (eps^2 ln L)) lands exactly on
/// `n_target` (the half-step keeps the floor stable under rounding).
pub fn eps_for_target_n(alpha: f64, num_users: usize, n_target: usize) -> f64 {
    alpha * (0.01 / ((n_target as f64 + 0.5) * (num_users as f64).ln())).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn masses_sum_to_one() {
        for &(alpha, l, n) in &[(0.1, 20, 8), (0.2, 100, 16), (0.3, 20, 64)] {
            let eps = eps_for_target_n(alpha, l, n);
            let law = build_e_n::<f64>(n, alpha, eps, l).unwrap();
            assert_relative_eq!(law.total_mass(), 1.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn eps_zero_is_truncated_fair_coin() {
        // With eps = 0 the law is the fair product restricted to the band,
        // renormalized; every in-band class is proportional to C(n,k).
        let n = 60;
        let law = build_e_n::<f64>(n, 0.25, 0.0, 20).unwrap();
        let fair_outside = law.fair_coin_outside_mass();
        assert!(fair_outside > 0.0, "want an actually truncated case");
        assert_relative_eq!(law.z(), 1.0 - fair_outside, epsilon = 1e-12);
        let ratio: Vec<f64> = (0..=n)
            .filter(|&k| law.in_band(k))
            .map(|k| {
                let fair = ln_binomials::<f64>(n)[k] - (n as f64) * std::f64::consts::LN_2;
                law.class_mass(k) / fair.exp()
            })
            .collect();
        for w in ratio.windows(2) {
            assert_relative_eq!(w[0], w[1], max_relative = 1e-10);
        }
        // TV of the mixture reduces to the truncation residue times alpha.
        let tv = tv_mixture::<f64>(n, 0.25, 0.0, 20).unwrap();
        assert_relative_eq!(tv, 0.25 * fair_outside, max_relative = 1e-10);
    }

    #[test]
    fn small_n_matches_full_enumeration() {
        // Oracle: the pointwise construction over all 2^8 sequences.
        let (n, alpha, l) = (8usize, 0.3, 20usize);
        let eps = 0.01;
        let law = build_e_n::<f64>(n, alpha, eps, l).unwrap();

        let ln_l = (l as f64).ln();
        let delta_max = 4.0 * ((n as f64) * ln_l).sqrt();
        let fair = 0.5f64.powi(n as i32);
        let mut class_unnorm = vec![0.0f64; n + 1];
        let mut z_alpha = 0.0f64;
        for bits in 0u32..(1 << n) {
            let k = bits.count_ones() as usize;
            let delta = (2 * k) as f64 - n as f64;
            if delta.abs() > delta_max {
                continue;
            }
            let biased = (0.5 + eps).powi(k as i32) * (0.5 - eps).powi((n - k) as i32);
            let diff = fair - (1.0 - alpha) * biased;
            assert!(diff >= 0.0);
            class_unnorm[k] += diff;
            z_alpha += diff;
        }
        for k in 0..=n {
            assert_relative_eq!(law.class_mass(k), class_unnorm[k] / z_alpha, max_relative = 1e-13);
        }
        assert_relative_eq!(law.z(), z_alpha / alpha, max_relative = 1e-13);

        // TV against the enumeration oracle.
        let mut tv_oracle = 0.0f64;
        for bits in 0u32..(1 << n) {
            let k = bits.count_ones() as usize;
            let delta = (2 * k) as f64 - n as f64;
            let biased = (0.5 + eps).powi(k as i32) * (0.5 - eps).powi((n - k) as i32);
            let e_mass = if delta.abs() <= delta_max {
                (fair - (1.0 - alpha) * biased) / (law.z() * alpha)
            } else {
                0.0
            };
            tv_oracle += (fair - (1.0 - alpha) * biased - alpha * e_mass).abs();
        }
        tv_oracle /= 2.0;
        let tv = tv_mixture::<f64>(n, alpha, eps, l).unwrap();
        assert_relative_eq!(tv, tv_oracle, max_relative = 1e-13, epsilon = 1e-15);
    }

    #[test]
    fn z_bounds_from_the_construction() {
        for &(alpha, l) in &[(0.1, 20usize), (0.2, 20), (0.3, 20), (0.1, 100), (0.3, 100)] {
            for &n_target in &[8usize, 16, 32, 64] {
                let eps = eps_for_target_n(alpha, l, n_target);
                let law = build_e_n::<f64>(n_target, alpha, eps, l).unwrap();
                let l8 = (l as f64).powi(8).recip();
                assert!(law.z() >= 1.0 - l8, "Z = {} too small at alpha={alpha} L={l} n={n_target}", law.z());
                assert!(
                    law.z() <= 1.0 + (1.0 - alpha) / alpha * l8,
                    "Z = {} too large at alpha={alpha} L={l} n={n_target}",
                    law.z()
                );
            }
        }
    }

    #[test]
    fn out_of_regime_is_flagged_and_too_biased_errors() {
        let law = build_e_n::<f64>(16, 0.3, 0.005, 20).unwrap();
        assert!(!law.in_regime());
        // Large eps makes the biased density dominate the fair one in-band.
        assert!(matches!(
            build_e_n::<f64>(16, 0.3, 0.2, 20),
            Err(Error::NegativeDensity { .. })
        ));
    }

    #[test]
    fn generic_scalar_instantiates_at_f32() {
        let law = build_e_n::<f32>(8, 0.3f32, 0.01f32, 20).unwrap();
        assert!((law.total_mass() - 1.0).abs() < 1e-5);
    }

    #[test]
    fn tapes_have_band_limited_weights() {
        let law = build_e_n::<f64>(16, 0.3, 0.0, 4096).unwrap();
        let mut rng = crate::sim::rng::stream_rng(5, "tape", 0);
        for _ in 0..200 {
            let tape = law.sample_tape(&mut rng);
            assert_eq!(tape.len(), 16);
            let k = tape.iter().filter(|&&b| b == 1).count();
            assert!(law.in_band(k));
            assert!(law.class_mass(k) > 0.0);
        }
    }
}
