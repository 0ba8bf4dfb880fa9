//! Robust mean estimation: univariate trimming and median-of-means,
//! high-dimensional spectral filtering, and the deterministic condition that
//! certifies when the estimators apply to non-i.i.d. inputs.

mod condition;
mod highdim;
mod univariate;

pub use condition::{check_condition_b1, check_condition_b1_with, ConditionConstants, ConditionReport};
pub use highdim::{
    robust_mean_highdim, robust_mean_highdim_with, sample_size_adequate, top_eigenpair,
    FilterConfig,
};
pub use univariate::{median_of_means, trimmed_mean, trimmed_mean_with, DEFAULT_TRIM_FACTOR};

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Estimator output with diagnostics. `estimate` is a scalar for the
/// univariate estimators and a vector for the high-dimensional one;
/// `spectral_bound` is the final top covariance eigenvalue (high-dim only).
#[derive(Debug, Clone, PartialEq)]
pub struct RobustEstimate<R, E> {
    pub estimate: E,
    pub removed_fraction: R,
    pub iterations: usize,
    pub spectral_bound: Option<R>,
}

pub type ScalarEstimate<R> = RobustEstimate<R, R>;
pub type VectorEstimate<R> = RobustEstimate<R, Vec<R>>;

/// Weights over N sample points: they sum to one and no point carries more
/// than 1 / ((1 - eps) N).
#[derive(Debug, Clone)]
pub struct WeightVector<R> {
    weights: Vec<R>,
    eps: R,
}

impl<R: Real> WeightVector<R> {
    pub fn new(weights: Vec<R>, eps: R) -> Result<Self> {
        let n = weights.len();
        if n == 0 {
            return Err(Error::InvalidParameter("empty weight vector".into()));
        }
        let cap = ((R::one() - eps) * R::from_count(n)).recip();
        let tol = R::approx(1e-9);
        let total: R = weights.iter().copied().sum();
        if (total - R::one()).abs() > tol {
            return Err(Error::InvalidParameter(format!("weights sum to {total}, not 1")));
        }
        if weights.iter().any(|&w| w < -tol || w > cap + tol) {
            return Err(Error::InvalidParameter("weight outside [0, 1/((1-eps)N)]".into()));
        }
        Ok(Self { weights, eps })
    }

    pub fn weights(&self) -> &[R] {
        &self.weights
    }

    pub fn eps(&self) -> R {
        self.eps
    }
}
