use std::time::Instant;

use kmte::simulation::{run_study, Dgp, Estimator, SimulationReport, StudyConfig};
use kmte::Execution;

use crate::error::{CliError, CliResult};
use crate::settings::SimulateSettings;

/// Runs the study one design and censoring cell at a time, reporting
/// progress on standard error. Replicate streams are keyed by cell, so the
/// result equals a single `run_study` over the whole grid.
pub fn run(settings: &SimulateSettings, execution: Execution) -> CliResult<SimulationReport> {
    let config = study_config(settings, execution)?;
    let total = config.designs.len() * config.censoring.len();
    let mut report: Option<SimulationReport> = None;
    let started = Instant::now();
    for (i, &dgp) in config.designs.iter().enumerate() {
        for (j, &censoring) in config.censoring.iter().enumerate() {
            let k = i * config.censoring.len() + j + 1;
            eprintln!(
                "[{k}/{total}] design {} censoring {censoring}: {} replications of n={}",
                dgp.id(),
                config.reps,
                config.n
            );
            let cell = run_study(&StudyConfig {
                designs: vec![dgp],
                censoring: vec![censoring],
                ..config.clone()
            })?;
            for c in &cell.cells {
                eprintln!(
                    "[{k}/{total}] realized censoring {:.4}, elapsed {:.1}s",
                    c.realized_censoring,
                    started.elapsed().as_secs_f64()
                );
            }
            match report.as_mut() {
                None => report = Some(cell),
                Some(r) => {
                    r.cells.extend(cell.cells);
                    r.rows.extend(cell.rows);
                }
            }
        }
    }
    let mut report = report.expect("at least one cell");
    report.config = config;
    Ok(report)
}

pub fn study_config(settings: &SimulateSettings, execution: Execution) -> CliResult<StudyConfig> {
    let reps = settings.reps.unwrap_or(1000);
    if reps == 0 {
        return Err(CliError::Validation("reps must be at least 1".into()));
    }
    let designs = settings
        .designs
        .clone()
        .unwrap_or_default()
        .into_iter()
        .map(Dgp::try_from)
        .collect::<kmte::Result<Vec<_>>>()?;
    let estimators = settings
        .estimators
        .clone()
        .unwrap_or_default()
        .iter()
        .map(|e| {
            Estimator::parse(e)
                .ok_or_else(|| CliError::Validation(format!("unknown estimator {e:?}; expected 2SKM, Ignore or Uncens")))
        })
        .collect::<CliResult<Vec<_>>>()?;
    let censoring = settings.censoring.clone().unwrap_or_default();
    if let Some(c) = censoring.iter().find(|c| !(0.0..1.0).contains(*c)) {
        return Err(CliError::Validation(format!("censoring share must lie in [0, 1), got {c}")));
    }
    if designs.is_empty() || censoring.is_empty() || estimators.is_empty() {
        return Err(CliError::Validation("designs, censoring and estimators must be non-empty".into()));
    }
    Ok(StudyConfig {
        designs,
        censoring,
        reps,
        n: settings.n.unwrap_or(1000),
        estimators,
        propensity: settings.propensity.spec()?,
        seed: settings.seed.expect("seed resolved before running"),
        execution,
    })
}
