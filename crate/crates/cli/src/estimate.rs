use std::path::PathBuf;

use kmte::bootstrap::{uniform_band, BootstrapSpec};
use kmte::data::{validate_for_estimand, ValidationReport};
use kmte::effects::{estimate, Diagnostics, EstimationOptions, Grid};
use kmte::io::{load_csv, SchemaHint};
use kmte::{EstimandKind, Execution};
use serde::Serialize;

use crate::error::{CliError, CliResult};
use crate::settings::{sha256_file, EstimateSettings};

#[derive(Debug, Serialize)]
pub struct EstimateReport {
    pub status: &'static str,
    pub command: &'static str,
    pub version: &'static str,
    pub config: EstimateSettings,
    pub config_hash: String,
    pub seed: u64,
    pub input_sha256: String,
    pub estimand: EstimandKind,
    /// Outcome levels or quantile levels the curve is evaluated at; `[0]`
    /// for scalar estimands.
    pub grid: Vec<f64>,
    pub estimates: Vec<f64>,
    pub band: Option<Band>,
    pub sample: SampleSummary,
    pub diagnostics: Diagnostics,
}

#[derive(Debug, Serialize)]
pub struct Band {
    pub alpha: f64,
    pub halfwidth: f64,
    pub critical_value: f64,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub replicates: usize,
    pub failed_replicates: usize,
}

#[derive(Debug, Serialize)]
pub struct SampleSummary {
    pub n: usize,
    pub covariates: usize,
    pub censoring_fraction: f64,
    pub validation: ValidationReport,
}

/// Runs an estimate from fully resolved settings (seed included).
pub fn run(settings: &EstimateSettings, execution: Execution) -> CliResult<EstimateReport> {
    let input: PathBuf = settings
        .input
        .clone()
        .ok_or_else(|| CliError::Validation("an input file is required".into()))?;
    let kind: EstimandKind = settings
        .estimand
        .ok_or_else(|| CliError::Validation("an estimand is required".into()))?
        .into();
    let seed = settings.seed.expect("seed resolved before running");
    let options = options(settings, kind)?;

    let input_sha256 = sha256_file(&input)?;
    let sample = load_csv(&input, SchemaHint::default())?;
    let validation = validate_for_estimand(&sample, kind);
    validation.ensure()?;
    log::info!("loaded {} rows from {}", sample.len(), input.display());

    let fit = estimate(&sample, kind, &options)?;
    let grid = fit.curve.grid.clone();
    let estimates = fit.curve.estimates.clone();

    let replicates = settings.bootstrap_b.unwrap_or(0);
    let band = if replicates > 0 {
        let alpha = settings.alpha.unwrap_or(0.05);
        let replicate_options = pinned_grid(&options, kind, &grid);
        let spec = BootstrapSpec::new(seed)
            .with_replicates(replicates)
            .with_alpha(alpha)
            .with_execution(execution);
        let result = uniform_band(
            &sample,
            |s| estimate(s, kind, &replicate_options).map(|e| e.curve),
            &spec,
        )?;
        Some(Band {
            alpha,
            halfwidth: result.band_halfwidth,
            critical_value: result.critical_value,
            lower: estimates.iter().map(|e| e - result.band_halfwidth).collect(),
            upper: estimates.iter().map(|e| e + result.band_halfwidth).collect(),
            replicates,
            failed_replicates: result.failed_replicates,
        })
    } else {
        None
    };

    Ok(EstimateReport {
        status: "ok",
        command: "estimate",
        version: env!("CARGO_PKG_VERSION"),
        config: settings.clone(),
        config_hash: settings.fingerprint(),
        seed,
        input_sha256,
        estimand: kind,
        grid,
        estimates,
        band,
        sample: SampleSummary {
            n: sample.len(),
            covariates: sample.covariate_dim(),
            censoring_fraction: sample.censoring_fraction(),
            validation,
        },
        diagnostics: fit.diagnostics,
    })
}

fn options(settings: &EstimateSettings, kind: EstimandKind) -> CliResult<EstimationOptions> {
    let alpha = settings.alpha.unwrap_or(0.05);
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(CliError::Validation(format!("alpha must lie in (0, 1), got {alpha}")));
    }
    if settings.grid.is_some() && (kind.is_scalar() || kind.is_quantile()) {
        return Err(CliError::Validation(format!(
            "grid applies to distribution estimands, not {kind:?}; use tau_grid for quantiles"
        )));
    }
    if settings.tau_grid.is_some() && !kind.is_quantile() {
        return Err(CliError::Validation(format!(
            "tau_grid applies to quantile estimands, not {kind:?}"
        )));
    }
    let explicit = |g: &Option<Vec<f64>>| -> CliResult<Grid> {
        match g {
            None => Ok(Grid::Auto),
            Some(points) => Ok(Grid::explicit(points.clone())?),
        }
    };
    Ok(EstimationOptions {
        propensity: settings.propensity.spec()?,
        y_grid: explicit(&settings.grid)?,
        tau_grid: explicit(&settings.tau_grid)?,
        allow_defective: settings.allow_defective.unwrap_or(false),
    })
}

/// Bootstrap replicates must reuse the grid of the original estimate.
fn pinned_grid(options: &EstimationOptions, kind: EstimandKind, grid: &[f64]) -> EstimationOptions {
    let mut pinned = options.clone();
    if kind.is_quantile() {
        pinned.tau_grid = Grid::Explicit(grid.to_vec());
    } else if !kind.is_scalar() {
        pinned.y_grid = Grid::Explicit(grid.to_vec());
    }
    pinned
}
