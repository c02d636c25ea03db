//! Monte Carlo harness for the unconfounded setup: four designs with
//! exponential censoring calibrated to a target share, the two-step
//! Kaplan-Meier estimators against naive baselines, and bias/RMSE reports.

mod calibrate;
mod design;
mod study;

pub use calibrate::{calibrate_censoring, censoring_probability, gauss_hermite, normal_exponential_censoring};
pub use design::{generate, DesignSpec, Dgp};
pub use study::{
    estimate_targets, naive_ignore, naive_uncensored, run_estimator, run_study, CellSummary, Estimator,
    ReportRow, SimulationReport, StudyConfig, Target,
};
