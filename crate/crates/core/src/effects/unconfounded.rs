//! Average, distributional and quantile treatment effects under
//! unconfoundedness.
//!
//! Each arm's potential-outcome CDF puts mass `W_i / p(X_i)` (treated) or
//! `W_i / (1 - p(X_i))` (control) on its uncensored order statistics, where
//! `W_i` are the arm's product-limit weights scaled by `n_t / n`. The weights
//! are not normalized, so a CDF's total mass can differ from one.

use crate::data::{CensoredSample, EffectCurve, EstimandKind};
use crate::dist::{cdf_eval, generalized_inverse, StepDistribution};
use crate::error::{Error, Result};
use crate::km::{km_weights, order_group, support_diagnostics, KaplanMeierWeights, OrderedGroup, SupportDiagnostics};
use crate::propensity::{PropensityFit, PropensitySpec};

use super::{distinct_below, resolve_tau_grid, Diagnostics, Estimate, EstimationOptions, Grid};

#[derive(Debug, Clone)]
struct Arm {
    label: &'static str,
    group: OrderedGroup,
    weights: KaplanMeierWeights,
    /// `1 / p` or `1 / (1 - p)` at each ordered position.
    inverse_prob: Vec<f64>,
    cdf: StepDistribution,
}

impl Arm {
    fn build(
        sample: &CensoredSample,
        propensity: &PropensityFit,
        treated: bool,
    ) -> Result<Self> {
        let label = if treated { "t=1" } else { "t=0" };
        let group = order_group(sample, |o| o.t == treated)
            .map_err(|_| Error::EmptyGroup(format!("treatment arm {label}")))?;
        if group.uncensored_count() == 0 {
            return Err(Error::NoUncensored(format!("treatment arm {label}")));
        }
        let fitted = propensity.fitted();
        let inverse_prob: Vec<f64> = group
            .original_index()
            .iter()
            .map(|&i| if treated { 1.0 / fitted[i] } else { 1.0 / (1.0 - fitted[i]) })
            .collect();
        let weights = km_weights(&group);
        let cdf = StepDistribution::from_atoms(
            group
                .sorted_q()
                .iter()
                .zip(weights.weights())
                .zip(&inverse_prob)
                .map(|((&q, w), ip)| (q, w * ip)),
        )?;
        Ok(Self {
            label,
            group,
            weights,
            inverse_prob,
            cdf,
        })
    }

    fn mean(&self, allow_defective: bool) -> Result<f64> {
        if self.group.max_is_censored() {
            let mass = self.weights.within_mass();
            if !allow_defective {
                return Err(Error::DefectiveMass {
                    group: format!("treatment arm {}", self.label),
                    mass,
                });
            }
            log::warn!(
                "treatment arm {}: largest observation censored, mean is truncated (KM mass {mass:.4})",
                self.label
            );
        }
        let q = self.group.sorted_q();
        Ok((0..q.len())
            .filter(|&i| self.weights.jumps()[i] > 0.0)
            .map(|i| self.weights.weight(i) * q[i] * self.inverse_prob[i])
            .sum())
    }
}

/// Fitted ingredients of the unconfounded estimators.
#[derive(Debug, Clone)]
pub struct UnconfoundedFit {
    /// `[control, treated]`.
    arms: [Arm; 2],
    propensity: PropensityFit,
    support: SupportDiagnostics,
}

impl UnconfoundedFit {
    /// Fits the propensity score of `t` on the covariates, then the arms.
    pub fn new(sample: &CensoredSample, spec: &PropensitySpec) -> Result<Self> {
        if !sample.schema().has_t {
            return Err(Error::TreatmentRequired);
        }
        let propensity = spec.fit(&sample.covariates(), &sample.treatments())?;
        Self::with_propensity(sample, propensity)
    }

    /// Uses an already fitted propensity score whose fitted values are in
    /// sample order.
    pub fn with_propensity(sample: &CensoredSample, propensity: PropensityFit) -> Result<Self> {
        if propensity.fitted().len() != sample.len() {
            return Err(Error::DimensionMismatch {
                expected: sample.len(),
                actual: propensity.fitted().len(),
            });
        }
        let arms = [
            Arm::build(sample, &propensity, false)?,
            Arm::build(sample, &propensity, true)?,
        ];
        let support = support_diagnostics(arms.iter().map(|a| (a.label, &a.group)));
        Ok(Self {
            arms,
            propensity,
            support,
        })
    }

    fn arm(&self, treated: bool) -> &Arm {
        &self.arms[usize::from(treated)]
    }

    pub fn propensity(&self) -> &PropensityFit {
        &self.propensity
    }

    pub fn support(&self) -> &SupportDiagnostics {
        &self.support
    }

    /// Inverse-probability-weighted product-limit CDF of `Y_t`.
    pub fn potential_cdf(&self, treated: bool) -> &StepDistribution {
        &self.arm(treated).cdf
    }

    /// Estimated `E[Y_t]`.
    pub fn potential_mean(&self, treated: bool, allow_defective: bool) -> Result<f64> {
        self.arm(treated).mean(allow_defective)
    }

    /// Estimated `tau`-quantile of `Y_t`. The arm CDF has nonnegative jumps,
    /// so its monotone rearrangement is itself.
    pub fn potential_quantile(&self, treated: bool, tau: f64) -> Result<f64> {
        generalized_inverse(self.potential_cdf(treated), tau)
    }

    pub fn ate(&self, allow_defective: bool) -> Result<f64> {
        Ok(self.potential_mean(true, allow_defective)? - self.potential_mean(false, allow_defective)?)
    }

    /// Largest quantile level attainable in both arms.
    pub fn max_level(&self) -> f64 {
        self.arms
            .iter()
            .map(|a| a.cdf.total_mass())
            .fold(f64::INFINITY, f64::min)
    }

    pub fn resolve_y_grid(&self, grid: &Grid, allow_defective: bool) -> Result<Vec<f64>> {
        match grid {
            Grid::Auto => {
                let pooled = self.arms.iter().flat_map(|a| a.cdf.jump_points().iter().copied());
                let points = distinct_below(pooled, self.support.tau_h);
                if points.is_empty() {
                    return Err(Error::InvalidArgument(
                        "no uncensored outcomes below the support bound".into(),
                    ));
                }
                Ok(points)
            }
            Grid::Explicit(points) => {
                if self.support.defective && !allow_defective {
                    if let Some(&y) = points.iter().find(|&&y| y > self.support.tau_h) {
                        return Err(Error::BeyondSupport {
                            y,
                            bound: self.support.tau_h,
                        });
                    }
                }
                Ok(points.clone())
            }
        }
    }

    pub fn dte(&self, grid: &[f64]) -> Result<EffectCurve> {
        let (f1, f0) = (self.potential_cdf(true), self.potential_cdf(false));
        let values = grid.iter().map(|&y| cdf_eval(f1, y) - cdf_eval(f0, y)).collect();
        EffectCurve::new(EstimandKind::Dte, grid.to_vec(), values)
    }

    pub fn qte(&self, tau_grid: &[f64]) -> Result<EffectCurve> {
        let values = tau_grid
            .iter()
            .map(|&tau| Ok(self.potential_quantile(true, tau)? - self.potential_quantile(false, tau)?))
            .collect::<Result<Vec<_>>>()?;
        EffectCurve::new(EstimandKind::Qte, tau_grid.to_vec(), values)
    }

    pub fn diagnostics(&self) -> Diagnostics {
        let mut d = Diagnostics::new(self.support.clone());
        d.propensity = Some(self.propensity.summary());
        d.masses = self
            .arms
            .iter()
            .map(|a| (a.label.to_string(), a.cdf.total_mass()))
            .collect();
        d
    }

    pub fn estimate(&self, kind: EstimandKind, options: &EstimationOptions) -> Result<Estimate> {
        let curve = match kind {
            EstimandKind::Ate => EffectCurve::scalar(kind, self.ate(options.allow_defective)?),
            EstimandKind::Dte => {
                self.dte(&self.resolve_y_grid(&options.y_grid, options.allow_defective)?)?
            }
            EstimandKind::Qte => {
                self.qte(&resolve_tau_grid(&options.tau_grid, self.max_level())?)?
            }
            other => {
                return Err(Error::InvalidArgument(format!(
                    "{other:?} is not an unconfounded estimand"
                )))
            }
        };
        Ok(Estimate {
            curve,
            diagnostics: self.diagnostics(),
        })
    }
}

/// Fits the propensity score and returns the CDF of `Y_t`.
pub fn estimate_potential_cdf(
    sample: &CensoredSample,
    spec: &PropensitySpec,
    treated: bool,
) -> Result<StepDistribution> {
    Ok(UnconfoundedFit::new(sample, spec)?.potential_cdf(treated).clone())
}
