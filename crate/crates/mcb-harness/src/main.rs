//! mcb-lab: batch experiment runner for the multitask contextual bandit
//! laboratory.

use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};

use mcb_harness::bench::{
    contract_sample_size, estimator_bench_csv, run_estimator_cell, tv_certificate_grid, tv_csv,
};
use mcb_harness::config::ExperimentConfig;
use mcb_harness::plot::write_plot;
use mcb_harness::report::{aggregate, read_csv, write_csv};
use mcb_harness::runner::{replay_row, run_experiment, run_sweep};
use mcb_harness::init_workers;

#[derive(Parser)]
#[command(
    name = "mcb-lab",
    about = "Simulation laboratory for multitask contextual bandits with adversarial users",
    version
)]
struct Cli {
    /// Worker threads (default: MCB_WORKERS env var, else all CPUs).
    #[arg(long, global = true)]
    workers: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the configured cell once per algorithm and replication.
    Run {
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        replications: Option<usize>,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Run the sweep described by the config's [sweep] section.
    Sweep {
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        replications: Option<usize>,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Exact total-variation certificates for the tape-law grid.
    LowerBound {
        /// Comma-separated corruption rates.
        #[arg(long, default_value = "0.1,0.2,0.3", value_delimiter = ',')]
        alphas: Vec<f64>,
        /// Comma-separated user counts.
        #[arg(long, default_value = "20,100", value_delimiter = ',')]
        users: Vec<usize>,
        /// Comma-separated tape lengths.
        #[arg(long, default_value = "8,16,32,64", value_delimiter = ',')]
        lengths: Vec<usize>,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Monte Carlo check of the robust-estimator error contracts.
    EstimatorsBench {
        #[arg(long, default_value = "1,20,50", value_delimiter = ',')]
        dims: Vec<usize>,
        #[arg(long, default_value = "0.05,0.1,0.2", value_delimiter = ',')]
        alphas: Vec<f64>,
        #[arg(long, default_value_t = 100)]
        seeds: usize,
        #[arg(long, default_value_t = 10.0)]
        shift: f64,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Re-run one CSV row from its recorded seed and compare bit-exactly.
    Replay { csv: PathBuf, row: usize },
    /// Render an SVG chart from a sweep CSV.
    Plot {
        csv: PathBuf,
        #[arg(long, default_value = "suboptimality")]
        kind: String,
        #[arg(long)]
        output: Option<PathBuf>,
    },
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    init_workers(cli.workers);
    match cli.command {
        Command::Run { config, seed, replications, output } => {
            let config = load_config(&config, seed, replications, output)?;
            let result = run_experiment(&config)?;
            let path = PathBuf::from(&config.run.output);
            write_csv(&result, &path)?;
            print_summary(&result);
            println!("wrote {}", path.display());
        }
        Command::Sweep { config, seed, replications, output } => {
            let config = load_config(&config, seed, replications, output)?;
            let result = run_sweep(&config)?;
            let path = PathBuf::from(&config.run.output);
            write_csv(&result, &path)?;
            print_summary(&result);
            println!("wrote {}", path.display());
        }
        Command::LowerBound { alphas, users, lengths, output } => {
            let rows = tv_certificate_grid(&alphas, &users, &lengths)?;
            let csv = tv_csv(&rows);
            for r in &rows {
                println!(
                    "n={:<3} alpha={:<4} L={:<4} eps={:.6e} Z={:.12} tv={:.3e} bound={:.3e} {}{}",
                    r.n,
                    r.alpha,
                    r.users,
                    r.eps,
                    r.z,
                    r.tv,
                    r.bound,
                    if r.pass { "PASS" } else { "FAIL" },
                    if r.in_regime { "" } else { " (outside regime)" }
                );
            }
            if let Some(path) = output {
                std::fs::write(&path, csv).with_context(|| path.display().to_string())?;
                println!("wrote {}", path.display());
            }
            if rows.iter().any(|r| !r.pass) {
                bail!("certificate failed on the grid");
            }
        }
        Command::EstimatorsBench { dims, alphas, seeds, shift, output } => {
            let mut cells = Vec::new();
            for &d in &dims {
                for &alpha in &alphas {
                    let n = contract_sample_size(d, alpha);
                    let cell = run_estimator_cell(d, alpha, n, seeds, shift);
                    println!(
                        "d={:<3} alpha={:<5} N={:<6} trimmed_ok={:.2} highdim_ok={:.2} mean_broken={:.2} worst={:.3}",
                        cell.d, cell.alpha, cell.n, cell.trimmed_ok, cell.highdim_ok,
                        cell.mean_broken, cell.worst_highdim_error
                    );
                    cells.push(cell);
                }
            }
            if let Some(path) = output {
                std::fs::write(&path, estimator_bench_csv(&cells))
                    .with_context(|| path.display().to_string())?;
                println!("wrote {}", path.display());
            }
        }
        Command::Replay { csv, row } => {
            let result = read_csv(&csv)?;
            let Some(record) = result.rows.get(row) else {
                bail!("row {row} out of range (csv has {} rows)", result.rows.len());
            };
            let (fresh, matches) = replay_row(record)?;
            println!(
                "recorded: suboptimality={} value={}",
                record.suboptimality, record.value
            );
            println!("replayed: suboptimality={} value={}", fresh.suboptimality, fresh.value);
            if matches {
                println!("REPLAY PASS");
            } else {
                bail!("REPLAY FAIL: row {row} did not reproduce");
            }
        }
        Command::Plot { csv, kind, output } => {
            let result = read_csv(&csv)?;
            let path = output.unwrap_or_else(|| csv.with_extension("svg"));
            write_plot(&result, &kind, &path)?;
            println!("wrote {}", path.display());
        }
    }
    Ok(())
}

fn load_config(
    path: &PathBuf,
    seed: Option<u64>,
    replications: Option<usize>,
    output: Option<PathBuf>,
) -> Result<ExperimentConfig> {
    let mut config = ExperimentConfig::load(path)?;
    if let Some(seed) = seed {
        config.run.master_seed = seed;
    }
    if let Some(replications) = replications {
        config.run.replications = replications;
    }
    if let Some(output) = output {
        config.run.output = output.display().to_string();
    }
    config.validate()?;
    Ok(config)
}

fn print_summary(result: &mcb_harness::runner::SweepResult) {
    let failures = result.rows.iter().filter(|r| !r.error.is_empty()).count();
    println!("rows: {} ({} failed)", result.rows.len(), failures);
    for agg in aggregate(result) {
        println!(
            "  {}={:<8} {:<22} mean suboptimality {:.4} +- {:.4} (n={})",
            result.rows.first().map(|r| r.sweep_param.as_str()).unwrap_or("value"),
            agg.sweep_value,
            agg.algorithm,
            agg.mean,
            agg.stderr,
            agg.count
        );
    }
}
