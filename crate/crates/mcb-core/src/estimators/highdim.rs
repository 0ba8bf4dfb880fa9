//! High-dimensional robust mean estimation by weighted spectral filtering.
//!
//! Loop: form the weighted mean and covariance, take the top eigenvalue by
//! power iteration; if it sits below `stop_factor * sigma_sq` the weighted
//! mean is the answer, otherwise zero out the points with the largest squared
//! projection beyond the weighted median along the top eigenvector until a
//! fixed mass fraction is gone, and repeat. Removing half the mass without
//! passing the spectral test is a hard error.

use super::VectorEstimate;
use crate::error::{Error, Result};
use crate::scalar::Real;

#[derive(Debug, Clone, Copy)]
pub struct FilterConfig<R> {
    /// Stop once the top covariance eigenvalue is below this multiple of the
    /// claimed per-coordinate bound.
    pub stop_factor: R,
    /// Mass removed per filtering round.
    pub remove_fraction: R,
    /// Power-iteration eigenvalue tolerance.
    pub power_tol: R,
    /// Power-iteration step cap.
    pub power_cap: usize,
}

impl<R: Real> FilterConfig<R> {
    pub fn for_alpha(alpha: R, n: usize) -> Self {
        let floor = R::from_count(n).recip();
        Self {
            stop_factor: R::approx(9.0),
            remove_fraction: (alpha / R::approx(2.0)).max(floor),
            power_tol: R::approx(1e-8),
            power_cap: 1000,
        }
    }
}

/// Whether N clears the recommended sample-size floor for dimension d at
/// corruption rate alpha. Callers warn and proceed when it does not; the
/// scarce-user experiments deliberately run below it.
pub fn sample_size_adequate(n: usize, d: usize, alpha: f64) -> bool {
    if alpha <= 0.0 {
        return true;
    }
    let d = d as f64;
    n as f64 >= d * d.ln().max(1.0) / alpha
}

pub fn robust_mean_highdim<R: Real>(
    points: &[Vec<R>],
    alpha: R,
    sigma_sq: R,
) -> Result<VectorEstimate<R>> {
    let config = FilterConfig::for_alpha(alpha, points.len().max(1));
    robust_mean_highdim_with(points, alpha, sigma_sq, &config)
}

pub fn robust_mean_highdim_with<R: Real>(
    points: &[Vec<R>],
    alpha: R,
    sigma_sq: R,
    config: &FilterConfig<R>,
) -> Result<VectorEstimate<R>> {
    let n = points.len();
    if n == 0 {
        return Err(Error::InvalidParameter("no points".into()));
    }
    let d = points[0].len();
    if d == 0 || points.iter().any(|p| p.len() != d) {
        return Err(Error::DimensionMismatch("ragged or empty points".into()));
    }
    let a = alpha.to_f64().unwrap();
    if !(0.0..1.0 / 3.0).contains(&a) {
        return Err(Error::InvalidParameter(format!("alpha must lie in [0, 1/3), got {a}")));
    }
    if sigma_sq < R::zero() {
        return Err(Error::InvalidParameter("sigma_sq must be >= 0".into()));
    }

    let threshold = config.stop_factor * sigma_sq;
    let mut weights = vec![R::from_count(n).recip(); n];
    let mut scratch = vec![R::zero(); d];
    let mut cov = vec![R::zero(); d * d];

    for iteration in 0.. {
        let total: R = weights.iter().copied().sum();
        let mean = weighted_mean(points, &weights, total);
        weighted_covariance(points, &weights, total, &mean, &mut scratch, &mut cov);
        let (eigenvalue, direction) = top_eigenpair(&cov, d, config.power_tol, config.power_cap);

        if eigenvalue <= threshold {
            return Ok(VectorEstimate {
                estimate: mean,
                removed_fraction: R::one() - total,
                iterations: iteration,
                spectral_bound: Some(eigenvalue),
            });
        }

        // Squared projections along the top direction for surviving points.
        let taus: Vec<R> = points
            .iter()
            .map(|p| {
                let mut dot = R::zero();
                for ((&x, &m), &v) in p.iter().zip(&mean).zip(&direction) {
                    dot += (x - m) * v;
                }
                dot * dot
            })
            .collect();
        let median = weighted_median(&taus, &weights, total);

        // Largest projections beyond the median go first, by descending tau
        // then ascending index.
        let mut order: Vec<usize> = (0..n).filter(|&i| weights[i] > R::zero()).collect();
        order.sort_by(|&i, &j| taus[j].partial_cmp(&taus[i]).unwrap().then(i.cmp(&j)));
        let mut removed_round = R::zero();
        for &i in &order {
            if taus[i] <= median {
                break;
            }
            removed_round += weights[i];
            weights[i] = R::zero();
            if removed_round >= config.remove_fraction {
                break;
            }
        }
        if removed_round == R::zero() {
            // Degenerate spread: everything shares the median projection.
            let max_tau = order.iter().map(|&i| taus[i]).fold(R::neg_infinity(), R::max);
            for &i in &order {
                if taus[i] == max_tau {
                    weights[i] = R::zero();
                }
            }
        }

        let remaining: R = weights.iter().copied().sum();
        if remaining <= R::approx(0.5) {
            return Err(Error::FilterCollapse {
                removed: (R::one() - remaining).to_f64().unwrap(),
                eigenvalue: eigenvalue.to_f64().unwrap(),
                threshold: threshold.to_f64().unwrap(),
            });
        }
    }
    unreachable!("filter loop either returns or collapses");
}

fn weighted_mean<R: Real>(points: &[Vec<R>], weights: &[R], total: R) -> Vec<R> {
    let d = points[0].len();
    let mut mean = vec![R::zero(); d];
    for (p, &w) in points.iter().zip(weights) {
        if w == R::zero() {
            continue;
        }
        for (m, &x) in mean.iter_mut().zip(p) {
            *m += w * x;
        }
    }
    for m in &mut mean {
        *m /= total;
    }
    mean
}

/// Dense symmetric weighted covariance, upper triangle mirrored.
fn weighted_covariance<R: Real>(
    points: &[Vec<R>],
    weights: &[R],
    total: R,
    mean: &[R],
    scratch: &mut [R],
    cov: &mut [R],
) {
    let d = mean.len();
    cov.fill(R::zero());
    for (p, &w) in points.iter().zip(weights) {
        if w == R::zero() {
            continue;
        }
        for ((y, &x), &m) in scratch.iter_mut().zip(p).zip(mean) {
            *y = x - m;
        }
        for i in 0..d {
            let wyi = w * scratch[i];
            let row = &mut cov[i * d..i * d + d];
            for (j, &yj) in scratch.iter().enumerate().skip(i) {
                row[j] += wyi * yj;
            }
        }
    }
    for i in 0..d {
        for j in i + 1..d {
            cov[i * d + j] /= total;
            cov[j * d + i] = cov[i * d + j];
        }
        cov[i * d + i] /= total;
    }
}

/// Top eigenvalue and eigenvector of a symmetric PSD matrix by power
/// iteration with a deterministic start vector; the start is nudged by a
/// cycling basis vector whenever the iterate lands in the kernel.
pub fn top_eigenpair<R: Real>(mat: &[R], d: usize, tol: R, cap: usize) -> (R, Vec<R>) {
    let norm_scale = (0..d)
        .map(|i| mat[i * d + i].abs())
        .fold(R::zero(), R::max);
    let mut v = vec![R::from_count(d).sqrt().recip(); d];
    if norm_scale == R::zero() {
        return (R::zero(), v);
    }
    let mut lambda = R::zero();
    let mut w = vec![R::zero(); d];
    for step in 0..cap {
        for (i, wi) in w.iter_mut().enumerate() {
            let row = &mat[i * d..i * d + d];
            let mut acc = R::zero();
            for (&m, &x) in row.iter().zip(&v) {
                acc += m * x;
            }
            *wi = acc;
        }
        let new_lambda: R = v.iter().zip(&w).map(|(&x, &y)| x * y).sum();
        let norm = w.iter().map(|&x| x * x).sum::<R>().sqrt();
        if norm <= norm_scale * R::approx(1e-300) {
            // Stalled in the kernel: nudge deterministically and restart.
            let idx = step % d;
            v[idx] += R::one();
            let n2 = v.iter().map(|&x| x * x).sum::<R>().sqrt();
            for x in &mut v {
                *x /= n2;
            }
            continue;
        }
        for (x, &y) in v.iter_mut().zip(&w) {
            *x = y / norm;
        }
        if (new_lambda - lambda).abs() <= tol * new_lambda.abs().max(R::one()) && step > 0 {
            return (new_lambda, v);
        }
        lambda = new_lambda;
    }
    (lambda, v)
}

fn weighted_median<R: Real>(taus: &[R], weights: &[R], total: R) -> R {
    let mut idx: Vec<usize> = (0..taus.len()).filter(|&i| weights[i] > R::zero()).collect();
    idx.sort_by(|&i, &j| taus[i].partial_cmp(&taus[j]).unwrap());
    let half = total / R::approx(2.0);
    let mut acc = R::zero();
    for &i in &idx {
        acc += weights[i];
        if acc >= half {
            return taus[i];
        }
    }
    taus[*idx.last().unwrap()]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::estimators::trimmed_mean;
    use crate::sim::rng::stream_rng;
    use crate::sim::standard_normal;
    use approx::assert_relative_eq;

    fn gaussian_cloud(n: usize, d: usize, seed: u64) -> Vec<Vec<f64>> {
        let mut rng = stream_rng(seed, "cloud", 0);
        (0..n).map(|_| (0..d).map(|_| standard_normal(&mut rng)).collect()).collect()
    }

    #[test]
    fn identical_points_return_immediately() {
        let v = vec![1.0, -2.0, 3.0];
        let points = vec![v.clone(); 40];
        let est = robust_mean_highdim(&points, 0.1, 1.0).unwrap();
        for (a, b) in est.estimate.iter().zip(&v) {
            assert_relative_eq!(a, b, epsilon = 1e-12);
        }
        assert_eq!(est.iterations, 0);
        assert!(est.spectral_bound.unwrap() <= 1e-20);
    }

    #[test]
    fn clean_data_equals_sample_mean() {
        let points = gaussian_cloud(2000, 10, 1);
        let est = robust_mean_highdim(&points, 0.0, 1.0).unwrap();
        assert_eq!(est.iterations, 0);
        let mut mean = vec![0.0; 10];
        for p in &points {
            for (m, &x) in mean.iter_mut().zip(p) {
                *m += x;
            }
        }
        for m in &mut mean {
            *m /= 2000.0;
        }
        for (a, b) in est.estimate.iter().zip(&mean) {
            assert_relative_eq!(a, b, epsilon = 1e-9);
        }
    }

    #[test]
    fn d1_matches_trimmed_mean_band() {
        let alpha = 0.1f64;
        let band = 3.0 * alpha.sqrt();
        for seed in 0..100u64 {
            let mut rng = stream_rng(seed, "d1", 0);
            let mut samples: Vec<f64> = (0..400).map(|_| standard_normal(&mut rng)).collect();
            for s in samples.iter_mut().take(40) {
                *s = 10.0;
            }
            let trimmed = trimmed_mean(&samples, alpha).unwrap().estimate;
            let points: Vec<Vec<f64>> = samples.iter().map(|&s| vec![s]).collect();
            let filtered = robust_mean_highdim(&points, alpha, 1.0).unwrap().estimate[0];
            assert!(
                (filtered - trimmed).abs() <= band,
                "seed {seed}: filter {filtered} vs trim {trimmed}"
            );
        }
    }

    #[test]
    fn planted_shift_is_filtered_while_mean_breaks() {
        let (n, d, alpha) = (5000usize, 50usize, 0.1f64);
        let mut points = gaussian_cloud(n, d, 7);
        let corrupt = (alpha * n as f64) as usize;
        for p in points.iter_mut().take(corrupt) {
            for x in p.iter_mut() {
                *x = 10.0;
            }
        }
        let est = robust_mean_highdim(&points, alpha, 1.0).unwrap();
        let err: f64 = est.estimate.iter().map(|x| x * x).sum::<f64>().sqrt();
        assert!(err <= 3.0 * alpha.sqrt(), "filtered error {err}");
        assert!(est.iterations >= 1);
        assert!(est.removed_fraction < 0.5);

        let mut mean = vec![0.0; d];
        for p in &points {
            for (m, &x) in mean.iter_mut().zip(p) {
                *m += x;
            }
        }
        let mean_err: f64 = mean.iter().map(|x| (x / n as f64).powi(2)).sum::<f64>().sqrt();
        assert!(mean_err >= alpha * 10.0 * (d as f64).sqrt() / 2.0, "plain mean err {mean_err}");
    }

    #[test]
    fn collapse_when_sigma_claim_is_wrong() {
        // Claiming near-zero covariance for unit-variance data forces the
        // filter to strip mass until the hard stop.
        let points = gaussian_cloud(300, 5, 3);
        let result = robust_mean_highdim(&points, 0.2, 1e-9);
        assert!(matches!(result, Err(Error::FilterCollapse { .. })));
    }

    #[test]
    fn rotation_equivariance() {
        let (n, d, alpha) = (400usize, 5usize, 0.1f64);
        let mut points = gaussian_cloud(n, d, 21);
        for p in points.iter_mut().take(40) {
            for x in p.iter_mut() {
                *x = 8.0;
            }
        }
        // Fixed Householder reflection Q = I - 2 u u^T.
        let u = {
            let raw: Vec<f64> = (1..=d).map(|i| (i as f64).sin() + 0.3).collect();
            let norm: f64 = raw.iter().map(|x| x * x).sum::<f64>().sqrt();
            raw.into_iter().map(|x| x / norm).collect::<Vec<_>>()
        };
        let reflect = |p: &[f64]| -> Vec<f64> {
            let dot: f64 = p.iter().zip(&u).map(|(&a, &b)| a * b).sum();
            p.iter().zip(&u).map(|(&a, &b)| a - 2.0 * dot * b).collect()
        };
        let rotated: Vec<Vec<f64>> = points.iter().map(|p| reflect(p)).collect();
        let base = robust_mean_highdim(&points, alpha, 1.0).unwrap().estimate;
        let rot = robust_mean_highdim(&rotated, alpha, 1.0).unwrap().estimate;
        let mapped = reflect(&base);
        for (a, b) in mapped.iter().zip(&rot) {
            assert!((a - b).abs() <= 1e-6, "{a} vs {b}");
        }
    }

    #[test]
    fn top_eigenpair_on_known_matrix() {
        // diag(3, 1) rotated by 45 degrees.
        let c = std::f64::consts::FRAC_1_SQRT_2;
        let mat = [
            3.0 * c * c + c * c,
            3.0 * c * c - c * c,
            3.0 * c * c - c * c,
            3.0 * c * c + c * c,
        ];
        let (lambda, v) = top_eigenpair(&mat, 2, 1e-12, 1000);
        assert_relative_eq!(lambda, 3.0, epsilon = 1e-8);
        assert_relative_eq!(v[0].abs(), c, epsilon = 1e-5);
    }
}
