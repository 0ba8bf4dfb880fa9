//! Experiment orchestration for the multitask contextual bandit laboratory:
//! TOML configs, seeded sweeps with per-row replay, CSV emission, SVG plots,
//! and the certificate/bench grids behind the CLI.

pub mod bench;
pub mod config;
pub mod plot;
pub mod report;
pub mod runner;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("config: {0}")]
    Config(String),
    #[error("io: {0}")]
    Io(String),
    #[error("plot: {0}")]
    Plot(String),
    #[error("bench: {0}")]
    Bench(String),
}

/// Worker count: explicit flag, else the MCB_WORKERS environment variable,
/// else one thread per CPU. Call once at startup.
pub fn init_workers(explicit: Option<usize>) {
    let from_env = std::env::var("MCB_WORKERS").ok().and_then(|v| v.parse::<usize>().ok());
    if let Some(n) = explicit.or(from_env) {
        if n > 0 {
            let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
        }
    }
}
