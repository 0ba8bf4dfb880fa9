//! Multitask contextual bandits under coordinated adversarial users.
//!
//! A shared bandit task is played by L users of which an alpha-fraction may
//! report arbitrary contexts and rewards. This crate provides the task model
//! with exact policy evaluation, robust mean estimators (univariate trimming
//! and high-dimensional spectral filtering), the interaction protocol with
//! pluggable adversary strategies, the learning algorithms built on the
//! estimators, UCB baselines, and the indistinguishable-system constructions
//! with their exact total-variation certificates.
//!
//! Numeric kernels are generic over the scalar type through [`Real`];
//! simulation and experiment code fixes `f64` (see the aliases below).

pub mod algos;
pub mod bandit;
pub mod error;
pub mod estimators;
pub mod lowerbound;
pub mod scalar;
pub mod sim;

pub use error::{Error, Result};
pub use scalar::Real;

/// Concrete f64 aliases for the common case.
pub type Instance = bandit::BanditInstance<f64>;
pub type PolicyF = bandit::Policy<f64>;
pub type TableF = bandit::Table<f64>;
pub type ValueReportF = bandit::ValueReport<f64>;
pub type ScalarEstimateF = estimators::ScalarEstimate<f64>;
pub type VectorEstimateF = estimators::VectorEstimate<f64>;
pub type WeightLawF = lowerbound::WeightLawE<f64>;
