//! Treatment-effect estimators built on Kaplan-Meier integrals.
//!
//! Each setup has a fit type that does the expensive work once (ordering the
//! groups, product-limit weights, first-step nuisance) and then answers every
//! estimand of that setup:
//!
//! * [`unconfounded::UnconfoundedFit`]: ATE, DTE, QTE
//! * [`late::LateFit`]: LATE, LDTE, LQTE for compliers
//! * [`cic::CicFit`]: ATT, DTT, QTT under changes-in-changes
//!
//! [`estimate`] dispatches on an [`EstimandKind`].

pub mod cic;
pub mod late;
pub mod unconfounded;

use serde::{Deserialize, Serialize};

use crate::data::{validate_for_estimand, CensoredSample, EffectCurve, EstimandKind, Setup};
use crate::error::{Error, Result};
use crate::km::SupportDiagnostics;
use crate::propensity::{PropensitySpec, PropensitySummary};

pub use cic::CicFit;
pub use late::LateFit;
pub use unconfounded::UnconfoundedFit;

/// Evaluation points of a curve estimand.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Grid {
    /// Chosen from the data: observed uncensored outcomes inside the
    /// identified region for distributions, `0.05, 0.10, ..., 0.95`
    /// restricted to attainable levels for quantiles.
    #[default]
    Auto,
    Explicit(Vec<f64>),
}

impl Grid {
    pub fn explicit(points: Vec<f64>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::InvalidArgument("grid is empty".into()));
        }
        if points.iter().any(|p| !p.is_finite()) || points.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidArgument(
                "grid must be finite and strictly ascending".into(),
            ));
        }
        Ok(Grid::Explicit(points))
    }
}

/// Everything an estimand needs besides the sample.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct EstimationOptions {
    /// Treatment propensity for the unconfounded setup, instrument
    /// propensity for the local setup; unused by changes-in-changes.
    pub propensity: PropensitySpec,
    pub y_grid: Grid,
    pub tau_grid: Grid,
    /// Report truncated estimands instead of failing when a group's largest
    /// observation is censored.
    pub allow_defective: bool,
}

/// Diagnostics attached to every estimate.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Diagnostics {
    pub support: SupportDiagnostics,
    pub propensity: Option<PropensitySummary>,
    /// First-stage `(kappa_0, kappa_1)` in the local setup.
    pub kappa: Option<[f64; 2]>,
    /// Total mass of each estimated distribution, by label.
    pub masses: Vec<(String, f64)>,
    /// Largest correction applied when clipping rearranged CDF levels.
    pub clip_magnitude: f64,
    pub warnings: Vec<String>,
}

impl Diagnostics {
    fn new(support: SupportDiagnostics) -> Self {
        Self {
            support,
            propensity: None,
            kappa: None,
            masses: Vec::new(),
            clip_magnitude: 0.0,
            warnings: Vec::new(),
        }
    }

    fn warn(&mut self, message: String) {
        log::warn!("{message}");
        self.warnings.push(message);
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Estimate {
    pub curve: EffectCurve,
    pub diagnostics: Diagnostics,
}

pub(crate) const AUTO_TAU_STEP: usize = 19;

/// `0.05, 0.10, ..., 0.95` restricted to levels `<= max_level`.
pub(crate) fn auto_tau_grid(max_level: f64) -> Result<Vec<f64>> {
    let grid: Vec<f64> = (1..=AUTO_TAU_STEP)
        .map(|i| i as f64 / 20.0)
        .filter(|&tau| tau <= max_level)
        .collect();
    if grid.is_empty() {
        return Err(Error::BeyondIdentifiedRegion {
            tau: 0.05,
            mass: max_level,
        });
    }
    Ok(grid)
}

/// Distinct values strictly below `bound`, ascending.
pub(crate) fn distinct_below(values: impl IntoIterator<Item = f64>, bound: f64) -> Vec<f64> {
    let mut v: Vec<f64> = values.into_iter().filter(|&y| y < bound).collect();
    v.sort_by(f64::total_cmp);
    v.dedup();
    v
}

pub(crate) fn resolve_tau_grid(grid: &Grid, max_level: f64) -> Result<Vec<f64>> {
    match grid {
        Grid::Auto => auto_tau_grid(max_level),
        Grid::Explicit(points) => {
            if let Some(&tau) = points.iter().find(|&&t| !(t > 0.0 && t < 1.0)) {
                return Err(Error::InvalidArgument(format!(
                    "quantile level {tau} outside (0, 1)"
                )));
            }
            Ok(points.clone())
        }
    }
}

/// Estimates `kind` on `sample`, validating the sample first.
pub fn estimate(
    sample: &CensoredSample,
    kind: EstimandKind,
    options: &EstimationOptions,
) -> Result<Estimate> {
    validate_for_estimand(sample, kind).ensure()?;
    match kind.setup() {
        Setup::Unconfounded => UnconfoundedFit::new(sample, &options.propensity)?.estimate(kind, options),
        Setup::Local => LateFit::new(sample, &options.propensity)?.estimate(kind, options),
        Setup::ChangesInChanges => CicFit::new(sample)?.estimate(kind, options),
    }
}
