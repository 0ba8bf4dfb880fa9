//! Standalone benches behind the CLI: the estimator-contract Monte Carlo and
//! the total-variation certificate grid.

use rayon::prelude::*;

use mcb_core::estimators::{robust_mean_highdim, trimmed_mean};
use mcb_core::lowerbound::{build_e_n, eps_for_target_n, tv_mixture};
use mcb_core::sim::rng::stream_rng;
use mcb_core::sim::standard_normal;

use crate::HarnessError;

/// One (dimension, corruption) cell of the estimator bench.
#[derive(Debug, Clone)]
pub struct EstimatorCell {
    pub d: usize,
    pub alpha: f64,
    pub n: usize,
    pub seeds: usize,
    pub shift: f64,
    /// Fraction of seeds with trimmed-mean error inside 3 sigma sqrt(alpha)
    /// (d = 1 route).
    pub trimmed_ok: f64,
    /// Fraction of seeds with filter error inside the band.
    pub highdim_ok: f64,
    /// Fraction of seeds where the plain mean's error exceeds the band.
    pub mean_broken: f64,
    pub worst_highdim_error: f64,
}

/// Sample size for the contract bench: 20 d ceil(ln d) / alpha (natural log,
/// floored at one).
pub fn contract_sample_size(d: usize, alpha: f64) -> usize {
    let factor = (d as f64).ln().ceil().max(1.0);
    (20.0 * d as f64 * factor / alpha).ceil() as usize
}

/// Worst-case corruption for the bench: floor(alpha N) points moved to
/// mu + shift per coordinate.
pub fn run_estimator_cell(d: usize, alpha: f64, n: usize, seeds: usize, shift: f64) -> EstimatorCell {
    let band = 3.0 * alpha.sqrt();
    let outcomes: Vec<(bool, bool, bool, f64)> = (0..seeds as u64)
        .into_par_iter()
        .map(|seed| {
            let mut rng = stream_rng(seed, "estimator-bench", d as u64);
            let mut points: Vec<Vec<f64>> =
                (0..n).map(|_| (0..d).map(|_| standard_normal(&mut rng)).collect()).collect();
            let corrupt = (alpha * n as f64).floor() as usize;
            for p in points.iter_mut().take(corrupt) {
                for x in p.iter_mut() {
                    *x = shift;
                }
            }

            let trimmed_ok = if d == 1 {
                let samples: Vec<f64> = points.iter().map(|p| p[0]).collect();
                trimmed_mean(&samples, alpha)
                    .map(|est| est.estimate.abs() <= band)
                    .unwrap_or(false)
            } else {
                true
            };

            let highdim_err = robust_mean_highdim(&points, alpha, 1.0)
                .map(|est| est.estimate.iter().map(|x| x * x).sum::<f64>().sqrt())
                .unwrap_or(f64::INFINITY);

            let mut mean = vec![0.0f64; d];
            for p in &points {
                for (m, &x) in mean.iter_mut().zip(p) {
                    *m += x;
                }
            }
            let mean_err =
                mean.iter().map(|m| (m / n as f64).powi(2)).sum::<f64>().sqrt();

            (trimmed_ok, highdim_err <= band, mean_err > band, highdim_err)
        })
        .collect();

    let count = outcomes.len() as f64;
    EstimatorCell {
        d,
        alpha,
        n,
        seeds,
        shift,
        trimmed_ok: outcomes.iter().filter(|o| o.0).count() as f64 / count,
        highdim_ok: outcomes.iter().filter(|o| o.1).count() as f64 / count,
        mean_broken: outcomes.iter().filter(|o| o.2).count() as f64 / count,
        worst_highdim_error: outcomes.iter().map(|o| o.3).fold(0.0, f64::max),
    }
}

pub fn estimator_bench_csv(cells: &[EstimatorCell]) -> String {
    let mut out = String::from(
        "# mcb-estimators v1\nd,alpha,n,seeds,shift,trimmed_ok,highdim_ok,mean_broken,worst_highdim_error\n",
    );
    for c in cells {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{}\n",
            c.d, c.alpha, c.n, c.seeds, c.shift, c.trimmed_ok, c.highdim_ok, c.mean_broken,
            c.worst_highdim_error
        ));
    }
    out
}

/// One row of the total-variation certificate grid.
#[derive(Debug, Clone)]
pub struct TvRow {
    pub n: usize,
    pub alpha: f64,
    pub eps: f64,
    pub users: usize,
    pub z: f64,
    pub tv: f64,
    pub bound: f64,
    pub pass: bool,
    pub in_regime: bool,
}

/// Evaluate the certificate at every (alpha, L, target n) combination, with
/// eps placed so the regime formula lands exactly on the target length.
pub fn tv_certificate_grid(
    alphas: &[f64],
    users: &[usize],
    targets: &[usize],
) -> Result<Vec<TvRow>, HarnessError> {
    let mut rows = Vec::new();
    for &alpha in alphas {
        for &l in users {
            for &n in targets {
                let eps = eps_for_target_n(alpha, l, n);
                let law = build_e_n::<f64>(n, alpha, eps, l)
                    .map_err(|e| HarnessError::Bench(e.to_string()))?;
                let tv = tv_mixture::<f64>(n, alpha, eps, l)
                    .map_err(|e| HarnessError::Bench(e.to_string()))?;
                let bound = (l as f64).powi(4).recip();
                rows.push(TvRow {
                    n,
                    alpha,
                    eps,
                    users: l,
                    z: law.z(),
                    tv,
                    bound,
                    pass: tv <= bound,
                    in_regime: law.in_regime(),
                });
            }
        }
    }
    Ok(rows)
}

pub fn tv_csv(rows: &[TvRow]) -> String {
    let mut out =
        String::from("# mcb-lower-bound v1\nn,alpha,eps,L,Z,tv,bound_1_over_L4,pass\n");
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{}\n",
            r.n,
            r.alpha,
            r.eps,
            r.users,
            r.z,
            r.tv,
            r.bound,
            u8::from(r.pass)
        ));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn contract_sample_size_uses_natural_log() {
        assert_eq!(contract_sample_size(1, 0.1), 200);
        assert_eq!(contract_sample_size(20, 0.1), 12000);
        assert_eq!(contract_sample_size(50, 0.2), 20000);
    }

    #[test]
    fn small_grid_passes_certificate() {
        let rows = tv_certificate_grid(&[0.2], &[20], &[8, 16]).unwrap();
        assert!(rows.iter().all(|r| r.pass && r.in_regime));
    }
}
