//! SVG line charts over aggregated sweep rows: one curve per algorithm with
//! a translucent mean +- standard-error band. Rendering only reads the rows;
//! it never re-runs anything, and identical input produces identical bytes
//! (fixed-precision coordinates).

use std::fmt::Write as _;

use crate::report::{aggregate, AggregateRow};
use crate::runner::SweepResult;
use crate::HarnessError;

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 420.0;
const MARGIN_LEFT: f64 = 64.0;
const MARGIN_RIGHT: f64 = 24.0;
const MARGIN_TOP: f64 = 34.0;
const MARGIN_BOTTOM: f64 = 48.0;

const PALETTE: &[&str] = &["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"];

pub const PLOT_KINDS: &[&str] = &["suboptimality"];

/// Render the given kind to an SVG string. Errors on an unknown kind or an
/// empty result (no file should be written then).
pub fn render_plot(result: &SweepResult, kind: &str) -> Result<String, HarnessError> {
    if !PLOT_KINDS.contains(&kind) {
        return Err(HarnessError::Plot(format!(
            "unknown plot kind {kind:?} (known: {})",
            PLOT_KINDS.join(", ")
        )));
    }
    let aggregated = aggregate(result);
    if aggregated.is_empty() {
        return Err(HarnessError::Plot("no successful rows to plot".into()));
    }
    let sweep_param = result
        .rows
        .first()
        .map(|r| r.sweep_param.clone())
        .unwrap_or_else(|| "value".into());

    // Stable curve order: algorithms by first appearance.
    let mut algorithms: Vec<String> = Vec::new();
    for row in &aggregated {
        if !algorithms.contains(&row.algorithm) {
            algorithms.push(row.algorithm.clone());
        }
    }

    let xs: Vec<f64> = aggregated.iter().map(|a| a.sweep_value).collect();
    let lo_ys: Vec<f64> = aggregated.iter().map(|a| a.mean - a.stderr).collect();
    let hi_ys: Vec<f64> = aggregated.iter().map(|a| a.mean + a.stderr).collect();
    let (x_min, x_max) = padded_range(min_of(&xs), max_of(&xs));
    let (y_min, y_max) = padded_range(min_of(&lo_ys).min(0.0), max_of(&hi_ys));

    let x_of = |x: f64| {
        MARGIN_LEFT + (x - x_min) / (x_max - x_min) * (WIDTH - MARGIN_LEFT - MARGIN_RIGHT)
    };
    let y_of = |y: f64| {
        HEIGHT - MARGIN_BOTTOM
            - (y - y_min) / (y_max - y_min) * (HEIGHT - MARGIN_TOP - MARGIN_BOTTOM)
    };

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">"#
    );
    let _ = writeln!(svg, r#"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#);
    let _ = writeln!(
        svg,
        r#"<text x="{:.1}" y="20" font-family="monospace" font-size="14">{} vs {}</text>"#,
        MARGIN_LEFT, kind, sweep_param
    );

    // Axes and ticks.
    let _ = writeln!(
        svg,
        r#"<line x1="{:.1}" y1="{:.1}" x2="{:.1}" y2="{:.1}" stroke="black"/>"#,
        MARGIN_LEFT,
        HEIGHT - MARGIN_BOTTOM,
        WIDTH - MARGIN_RIGHT,
        HEIGHT - MARGIN_BOTTOM
    );
    let _ = writeln!(
        svg,
        r#"<line x1="{:.1}" y1="{:.1}" x2="{:.1}" y2="{:.1}" stroke="black"/>"#,
        MARGIN_LEFT,
        MARGIN_TOP,
        MARGIN_LEFT,
        HEIGHT - MARGIN_BOTTOM
    );
    for i in 0..=4 {
        let fx = x_min + (x_max - x_min) * i as f64 / 4.0;
        let fy = y_min + (y_max - y_min) * i as f64 / 4.0;
        let _ = writeln!(
            svg,
            r#"<text x="{:.1}" y="{:.1}" font-family="monospace" font-size="11" text-anchor="middle">{}</text>"#,
            x_of(fx),
            HEIGHT - MARGIN_BOTTOM + 18.0,
            tick_label(fx)
        );
        let _ = writeln!(
            svg,
            r#"<text x="{:.1}" y="{:.1}" font-family="monospace" font-size="11" text-anchor="end">{}</text>"#,
            MARGIN_LEFT - 6.0,
            y_of(fy) + 4.0,
            tick_label(fy)
        );
        let _ = writeln!(
            svg,
            r##"<line x1="{:.1}" y1="{:.1}" x2="{:.1}" y2="{:.1}" stroke="#dddddd"/>"##,
            MARGIN_LEFT,
            y_of(fy),
            WIDTH - MARGIN_RIGHT,
            y_of(fy)
        );
    }

    for (index, algorithm) in algorithms.iter().enumerate() {
        let color = PALETTE[index % PALETTE.len()];
        let mut series: Vec<&AggregateRow> =
            aggregated.iter().filter(|a| &a.algorithm == algorithm).collect();
        series.sort_by(|a, b| a.sweep_value.partial_cmp(&b.sweep_value).unwrap());

        // Standard-error band.
        let mut band = String::new();
        for point in &series {
            let _ = write!(
                band,
                "{:.2},{:.2} ",
                x_of(point.sweep_value),
                y_of(point.mean + point.stderr)
            );
        }
        for point in series.iter().rev() {
            let _ = write!(
                band,
                "{:.2},{:.2} ",
                x_of(point.sweep_value),
                y_of(point.mean - point.stderr)
            );
        }
        let _ = writeln!(
            svg,
            r#"<polygon points="{}" fill="{}" fill-opacity="0.15" stroke="none"/>"#,
            band.trim_end(),
            color
        );

        let mut line = String::new();
        for point in &series {
            let _ = write!(line, "{:.2},{:.2} ", x_of(point.sweep_value), y_of(point.mean));
        }
        let _ = writeln!(
            svg,
            r#"<polyline points="{}" fill="none" stroke="{}" stroke-width="1.8"/>"#,
            line.trim_end(),
            color
        );
        for point in &series {
            let _ = writeln!(
                svg,
                r#"<circle cx="{:.2}" cy="{:.2}" r="2.6" fill="{}"/>"#,
                x_of(point.sweep_value),
                y_of(point.mean),
                color
            );
        }

        // Legend entry.
        let ly = MARGIN_TOP + 16.0 * index as f64;
        let _ = writeln!(
            svg,
            r#"<rect x="{:.1}" y="{:.1}" width="10" height="10" fill="{}"/>"#,
            WIDTH - MARGIN_RIGHT - 180.0,
            ly,
            color
        );
        let _ = writeln!(
            svg,
            r#"<text x="{:.1}" y="{:.1}" font-family="monospace" font-size="11">{}</text>"#,
            WIDTH - MARGIN_RIGHT - 165.0,
            ly + 9.0,
            algorithm
        );
    }
    svg.push_str("</svg>\n");
    Ok(svg)
}

pub fn write_plot(
    result: &SweepResult,
    kind: &str,
    path: &std::path::Path,
) -> Result<(), HarnessError> {
    let svg = render_plot(result, kind)?;
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent)
                .map_err(|e| HarnessError::Io(format!("{}: {e}", parent.display())))?;
        }
    }
    std::fs::write(path, svg).map_err(|e| HarnessError::Io(format!("{}: {e}", path.display())))
}

fn min_of(values: &[f64]) -> f64 {
    values.iter().copied().fold(f64::INFINITY, f64::min)
}

fn max_of(values: &[f64]) -> f64 {
    values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
}

fn padded_range(lo: f64, hi: f64) -> (f64, f64) {
    if lo == hi {
        (lo - 0.5, hi + 0.5)
    } else {
        let pad = (hi - lo) * 0.05;
        (lo - pad, hi + pad)
    }
}

fn tick_label(value: f64) -> String {
    if value.abs() >= 100.0 {
        format!("{value:.0}")
    } else if value.abs() >= 1.0 {
        format!("{value:.1}")
    } else {
        format!("{value:.3}")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::runner::RowRecord;

    fn sample_row(algorithm: &str, value: f64, sub: f64, rep: usize) -> RowRecord {
        RowRecord {
            sweep_param: "alpha".into(),
            sweep_value: value,
            algorithm: algorithm.into(),
            contexts: 2,
            actions: 2,
            users: 10,
            alpha: value,
            alpha_hat: value,
            eps0: 0.0,
            attack: "boost".into(),
            arrival: "round_robin".into(),
            nu: "uniform".into(),
            noise: "bernoulli".into(),
            gap: 0.3,
            t0: 10,
            t: 100,
            budget: 10.0,
            replication: rep,
            seed: rep as u64,
            suboptimality: sub,
            value: 0.5,
            k_b: 1.0,
            alpha_effective: value,
            diagnostics: String::new(),
            error: String::new(),
        }
    }

    fn sample_result() -> SweepResult {
        let mut rows = Vec::new();
        for (i, &v) in [0.0, 0.1, 0.2, 0.3].iter().enumerate() {
            for algo in ["robust_mcb", "naive_ucb", "independent_ucb", "corruption_robust_ucb"] {
                for rep in 0..3 {
                    rows.push(sample_row(algo, v, 0.01 * (i as f64 + 1.0) + 0.001 * rep as f64, rep));
                }
            }
        }
        SweepResult { rows }
    }

    #[test]
    fn renders_four_algorithm_curves() {
        let svg = render_plot(&sample_result(), "suboptimality").unwrap();
        assert_eq!(svg.matches("<polyline").count(), 4);
        assert_eq!(svg.matches("<polygon").count(), 4);
        assert!(svg.contains("robust_mcb"));
        assert!(svg.contains("corruption_robust_ucb"));
    }

    #[test]
    fn rerender_is_byte_identical() {
        let result = sample_result();
        let a = render_plot(&result, "suboptimality").unwrap();
        let b = render_plot(&result, "suboptimality").unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn empty_result_and_unknown_kind_error() {
        let empty = SweepResult { rows: Vec::new() };
        assert!(render_plot(&empty, "suboptimality").is_err());
        assert!(render_plot(&sample_result(), "spaghetti").is_err());
    }
}
