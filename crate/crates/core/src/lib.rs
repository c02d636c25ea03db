//! Two-step Kaplan-Meier estimators of average, distributional and quantile
//! treatment effects when the outcome is right-censored.
//!
//! The building blocks are Kaplan-Meier integrals: weighted sums over the
//! uncensored order statistics of each treatment (or instrument, or
//! group-period) cell, with a first-step nuisance estimate such as a
//! propensity score inside the integrand. On top of those sit the
//! unconfoundedness ([`effects::unconfounded`]), instrumental-variable
//! ([`effects::late`]) and changes-in-changes ([`effects::cic`]) estimators,
//! nonparametric-bootstrap uniform bands ([`bootstrap`]), and a Monte Carlo
//! harness ([`simulation`]).

pub mod bootstrap;
pub mod data;
pub mod dist;
pub mod effects;
pub mod error;
pub mod exec;
pub mod io;
pub mod km;
pub mod propensity;
pub mod rng;
pub mod simulation;

pub use data::{CensoredSample, EffectCurve, EstimandKind, Observation, Schema};
pub use dist::StepDistribution;
pub use error::{Error, Result};
pub use exec::Execution;

/// Numerical tolerance for identities that hold exactly in real arithmetic.
pub const EPS_NUM: f64 = 1e-10;
