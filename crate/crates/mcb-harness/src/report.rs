//! CSV emission and ingestion for sweep rows, plus the aggregation used by
//! plots and acceptance checks. Floats are written in shortest round-trip
//! form so identical results produce identical bytes.

use std::fmt::Write as _;
use std::path::Path;

use crate::runner::{RowRecord, SweepResult};
use crate::HarnessError;

pub const CSV_SCHEMA_COMMENT: &str = "# mcb-sweep v1: one row per (grid point, algorithm, replication); floats in shortest round-trip form; wall time is reported separately so reruns are byte-identical";

pub const CSV_HEADER: &str = "sweep_param,sweep_value,algorithm,contexts,actions,users,alpha,alpha_hat,eps0,attack,arrival,nu,noise,gap,t0,t,budget,replication,seed,suboptimality,value,k_b,alpha_effective,diagnostics,error";

pub fn to_csv(result: &SweepResult) -> String {
    let mut out = String::new();
    out.push_str(CSV_SCHEMA_COMMENT);
    out.push('\n');
    out.push_str(CSV_HEADER);
    out.push('\n');
    for row in &result.rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            row.sweep_param,
            row.sweep_value,
            row.algorithm,
            row.contexts,
            row.actions,
            row.users,
            row.alpha,
            row.alpha_hat,
            row.eps0,
            row.attack,
            row.arrival,
            row.nu,
            row.noise,
            row.gap,
            row.t0,
            row.t,
            row.budget,
            row.replication,
            row.seed,
            row.suboptimality,
            row.value,
            row.k_b,
            row.alpha_effective,
            row.diagnostics,
            row.error
        );
    }
    out
}

pub fn write_csv(result: &SweepResult, path: &Path) -> Result<(), HarnessError> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent)
                .map_err(|e| HarnessError::Io(format!("{}: {e}", parent.display())))?;
        }
    }
    std::fs::write(path, to_csv(result))
        .map_err(|e| HarnessError::Io(format!("{}: {e}", path.display())))
}

pub fn parse_csv(text: &str) -> Result<SweepResult, HarnessError> {
    let mut rows = Vec::new();
    for (number, line) in text.lines().enumerate() {
        if line.starts_with('#') || line == CSV_HEADER || line.is_empty() {
            continue;
        }
        rows.push(parse_line(line).map_err(|e| {
            HarnessError::Io(format!("csv line {}: {e}", number + 1))
        })?);
    }
    Ok(SweepResult { rows })
}

pub fn read_csv(path: &Path) -> Result<SweepResult, HarnessError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| HarnessError::Io(format!("{}: {e}", path.display())))?;
    parse_csv(&text)
}

fn parse_line(line: &str) -> Result<RowRecord, String> {
    let fields: Vec<&str> = line.split(',').collect();
    if fields.len() != 25 {
        return Err(format!("expected 25 fields, found {}", fields.len()));
    }
    fn num<T: std::str::FromStr>(s: &str, what: &str) -> Result<T, String> {
        s.parse().map_err(|_| format!("bad {what}: {s:?}"))
    }
    Ok(RowRecord {
        sweep_param: fields[0].to_string(),
        sweep_value: num(fields[1], "sweep_value")?,
        algorithm: fields[2].to_string(),
        contexts: num(fields[3], "contexts")?,
        actions: num(fields[4], "actions")?,
        users: num(fields[5], "users")?,
        alpha: num(fields[6], "alpha")?,
        alpha_hat: num(fields[7], "alpha_hat")?,
        eps0: num(fields[8], "eps0")?,
        attack: fields[9].to_string(),
        arrival: fields[10].to_string(),
        nu: fields[11].to_string(),
        noise: fields[12].to_string(),
        gap: num(fields[13], "gap")?,
        t0: num(fields[14], "t0")?,
        t: num(fields[15], "t")?,
        budget: num(fields[16], "budget")?,
        replication: num(fields[17], "replication")?,
        seed: num(fields[18], "seed")?,
        suboptimality: num(fields[19], "suboptimality")?,
        value: num(fields[20], "value")?,
        k_b: num(fields[21], "k_b")?,
        alpha_effective: num(fields[22], "alpha_effective")?,
        diagnostics: fields[23].to_string(),
        error: fields[24].to_string(),
    })
}

/// Mean and standard error of suboptimality per (sweep_value, algorithm),
/// in first-appearance order. Rows with errors are skipped.
#[derive(Debug, Clone, PartialEq)]
pub struct AggregateRow {
    pub sweep_value: f64,
    pub algorithm: String,
    pub mean: f64,
    pub stderr: f64,
    pub count: usize,
}

pub fn aggregate(result: &SweepResult) -> Vec<AggregateRow> {
    let mut order: Vec<(f64, String)> = Vec::new();
    let mut buckets: Vec<Vec<f64>> = Vec::new();
    for row in &result.rows {
        if !row.error.is_empty() || row.suboptimality.is_nan() {
            continue;
        }
        let key = (row.sweep_value, row.algorithm.clone());
        match order.iter().position(|k| k == &key) {
            Some(idx) => buckets[idx].push(row.suboptimality),
            None => {
                order.push(key);
                buckets.push(vec![row.suboptimality]);
            }
        }
    }
    order
        .into_iter()
        .zip(buckets)
        .map(|((sweep_value, algorithm), values)| {
            let count = values.len();
            let mean = values.iter().sum::<f64>() / count as f64;
            let variance = if count > 1 {
                values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (count - 1) as f64
            } else {
                0.0
            };
            AggregateRow {
                sweep_value,
                algorithm,
                mean,
                stderr: (variance / count as f64).sqrt(),
                count,
            }
        })
        .collect()
}

/// Mean suboptimality of one algorithm at one swept value.
pub fn mean_suboptimality(result: &SweepResult, algorithm: &str, sweep_value: f64) -> Option<f64> {
    aggregate(result)
        .into_iter()
        .find(|a| a.algorithm == algorithm && a.sweep_value == sweep_value)
        .map(|a| a.mean)
}

/// Spearman rank correlation (average ranks on ties).
pub fn spearman(xs: &[f64], ys: &[f64]) -> f64 {
    assert_eq!(xs.len(), ys.len());
    let rx = ranks(xs);
    let ry = ranks(ys);
    let n = xs.len() as f64;
    let mx = rx.iter().sum::<f64>() / n;
    let my = ry.iter().sum::<f64>() / n;
    let mut cov = 0.0;
    let mut vx = 0.0;
    let mut vy = 0.0;
    for (a, b) in rx.iter().zip(&ry) {
        cov += (a - mx) * (b - my);
        vx += (a - mx).powi(2);
        vy += (b - my).powi(2);
    }
    if vx == 0.0 || vy == 0.0 {
        return 0.0;
    }
    cov / (vx * vy).sqrt()
}

fn ranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&i, &j| values[i].partial_cmp(&values[j]).unwrap());
    let mut out = vec![0.0; values.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        let rank = (i + j) as f64 / 2.0 + 1.0;
        for &idx in &order[i..=j] {
            out[idx] = rank;
        }
        i = j + 1;
    }
    out
}

/// Least-squares slope of y on x.
pub fn slope(xs: &[f64], ys: &[f64]) -> f64 {
    assert_eq!(xs.len(), ys.len());
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let mut num = 0.0;
    let mut den = 0.0;
    for (x, y) in xs.iter().zip(ys) {
        num += (x - mx) * (y - my);
        den += (x - mx).powi(2);
    }
    num / den
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn spearman_on_known_data() {
        assert_relative_eq!(spearman(&[1.0, 2.0, 3.0, 4.0], &[0.1, 0.2, 0.3, 0.4]), 1.0);
        assert_relative_eq!(spearman(&[1.0, 2.0, 3.0, 4.0], &[0.4, 0.3, 0.2, 0.1]), -1.0);
        let mixed = spearman(&[1.0, 2.0, 3.0, 4.0], &[0.1, 0.3, 0.2, 0.4]);
        assert_relative_eq!(mixed, 0.8);
    }

    #[test]
    fn slope_on_exact_line() {
        let xs = [0.0, 1.0, 2.0, 3.0];
        let ys = [1.0, 0.5, 0.0, -0.5];
        assert_relative_eq!(slope(&xs, &ys), -0.5, epsilon = 1e-12);
    }
}
