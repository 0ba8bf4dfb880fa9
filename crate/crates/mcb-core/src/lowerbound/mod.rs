//! The attack laboratory: the tape law that hides a planted bias inside a
//! corrupted user population, its exact total-variation certificate, the two
//! indistinguishable reward systems, and the guessing-game experiment.

pub mod law;
pub mod systems;

pub use law::{build_e_n, eps_for_target_n, tv_mixture, WeightLawE};
pub use systems::{
    distinguish_experiment, run_system, CoinFlipDistinguisher, DistinguishOutcome,
    DistinguishParams, Distinguisher, OracleDistinguisher, ScanDistinguisher, SystemOutcome,
    SystemSpec, SystemVariant,
};
