//! Univariate robust estimators.

use super::ScalarEstimate;
use crate::error::{Error, Result};
use crate::scalar::Real;

/// Trim count factor: k = ceil(factor * alpha * N) samples per side.
pub const DEFAULT_TRIM_FACTOR: f64 = 2.0;

/// Alpha-trimmed mean: sort, discard the k smallest and k largest, average
/// the rest. Under alpha-fraction arbitrary corruption of a variance-sigma^2
/// sample the estimate lands within O(sigma sqrt(alpha)) of the true mean.
pub fn trimmed_mean<R: Real>(samples: &[R], alpha: R) -> Result<ScalarEstimate<R>> {
    trimmed_mean_with(samples, alpha, R::approx(DEFAULT_TRIM_FACTOR))
}

pub fn trimmed_mean_with<R: Real>(samples: &[R], alpha: R, trim_factor: R) -> Result<ScalarEstimate<R>> {
    let n = samples.len();
    if n < 2 {
        return Err(Error::InvalidParameter("trimmed mean needs at least 2 samples".into()));
    }
    let a = alpha.to_f64().unwrap();
    if !(0.0..1.0 / 3.0).contains(&a) {
        return Err(Error::InvalidParameter(format!("alpha must lie in [0, 1/3), got {a}")));
    }
    if samples.iter().any(|s| !s.is_finite()) {
        return Err(Error::InvalidParameter("non-finite sample".into()));
    }
    let k = (trim_factor * alpha * R::from_count(n)).ceil().to_usize().unwrap();
    if 2 * k >= n {
        return Err(Error::OverTrimmed { k, n });
    }
    let mut sorted = samples.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let kept = &sorted[k..n - k];
    let mean = kept.iter().copied().sum::<R>() / R::from_count(kept.len());
    Ok(ScalarEstimate {
        estimate: mean,
        removed_fraction: R::from_count(2 * k) / R::from_count(n),
        iterations: 0,
        spectral_bound: None,
    })
}

/// Median of block means over contiguous blocks in the given sample order.
/// Even-length medians take the lower middle element.
pub fn median_of_means<R: Real>(samples: &[R], num_blocks: usize) -> Result<R> {
    let n = samples.len();
    if num_blocks == 0 || num_blocks > n {
        return Err(Error::InvalidParameter(format!(
            "num_blocks must lie in [1, {n}], got {num_blocks}"
        )));
    }
    let mut means: Vec<R> = (0..num_blocks)
        .map(|b| {
            let lo = b * n / num_blocks;
            let hi = (b + 1) * n / num_blocks;
            samples[lo..hi].iter().copied().sum::<R>() / R::from_count(hi - lo)
        })
        .collect();
    means.sort_by(|a, b| a.partial_cmp(b).unwrap());
    Ok(means[(num_blocks - 1) / 2])
}
