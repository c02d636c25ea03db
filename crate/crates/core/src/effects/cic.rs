//! Changes-in-changes effects on the treated (group 1, period 1).
//!
//! Each `(g, period)` cell gets its own product-limit CDF with within-cell
//! (unscaled) weights. The no-treatment counterfactual for the treated cell
//! is `F_10(F_00^{-1}(F_01(y)))`; covariates are not used.

use crate::data::{CensoredSample, EffectCurve, EstimandKind};
use crate::dist::{cdf_eval, generalized_inverse, monotonize, StepDistribution};
use crate::error::{Error, Result};
use crate::km::{km_weights, order_group, support_diagnostics, KaplanMeierWeights, OrderedGroup, SupportDiagnostics};

use super::{distinct_below, resolve_tau_grid, Diagnostics, Estimate, EstimationOptions, Grid};

#[derive(Debug, Clone)]
struct Cell {
    label: String,
    group: OrderedGroup,
    weights: KaplanMeierWeights,
    cdf: StepDistribution,
}

impl Cell {
    fn build(sample: &CensoredSample, g: bool, period: bool) -> Result<Self> {
        let label = format!("g={},period={}", u8::from(g), u8::from(period));
        let group = order_group(sample, |o| o.g == Some(g) && o.period == Some(period))
            .map_err(|_| Error::EmptyGroup(format!("cell {label}")))?;
        if group.uncensored_count() == 0 {
            return Err(Error::NoUncensored(format!("cell {label}")));
        }
        let weights = km_weights(&group);
        let cdf = StepDistribution::from_atoms(
            group.sorted_q().iter().copied().zip(weights.jumps().iter().copied()),
        )?;
        Ok(Self {
            label,
            group,
            weights,
            cdf,
        })
    }

    fn atoms(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        let q = self.group.sorted_q();
        (0..q.len())
            .filter(|&i| self.weights.jumps()[i] > 0.0)
            .map(move |i| (q[i], self.weights.jumps()[i]))
    }
}

/// Fitted ingredients of the changes-in-changes estimators.
#[derive(Debug, Clone)]
pub struct CicFit {
    /// Indexed `[g][period]`.
    cells: [[Cell; 2]; 2],
    counterfactual: StepDistribution,
    support: SupportDiagnostics,
    warnings: Vec<String>,
}

impl CicFit {
    pub fn new(sample: &CensoredSample) -> Result<Self> {
        let schema = sample.schema();
        if !(schema.has_g && schema.has_period) {
            return Err(Error::DidColumnsRequired);
        }
        let cells = [
            [Cell::build(sample, false, false)?, Cell::build(sample, false, true)?],
            [Cell::build(sample, true, false)?, Cell::build(sample, true, true)?],
        ];
        let support = support_diagnostics(
            cells
                .iter()
                .flatten()
                .map(|c| (c.label.as_str(), &c.group)),
        );
        let mut warnings = Vec::new();
        let (c00, c10) = (&cells[0][0].group, &cells[1][0].group);
        let (lo00, hi00) = (c00.sorted_q()[0], c00.max_q());
        let (lo10, hi10) = (c10.sorted_q()[0], c10.max_q());
        if lo10 < lo00 || hi10 > hi00 {
            let msg = format!(
                "observed range of cell g=1,period=0 [{lo10}, {hi10}] is not inside that of g=0,period=0 [{lo00}, {hi00}]"
            );
            log::warn!("{msg}");
            warnings.push(msg);
        }
        let mut fit = Self {
            cells,
            counterfactual: StepDistribution::empty(),
            support,
            warnings,
        };
        fit.counterfactual = fit.build_counterfactual()?;
        Ok(fit)
    }

    fn cdf(&self, g: usize, period: usize) -> &StepDistribution {
        &self.cells[g][period].cdf
    }

    /// Product-limit CDF of cell `(g, period)`.
    pub fn cell_cdf(&self, g: bool, period: bool) -> &StepDistribution {
        self.cdf(usize::from(g), usize::from(period))
    }

    pub fn support(&self) -> &SupportDiagnostics {
        &self.support
    }

    /// Counterfactual CDF of the treated cell at `y`. Zero where
    /// `F_01(y) = 0`; errors where `F_01(y)` exceeds the mass of `F_00`.
    pub fn counterfactual_at(&self, y: f64) -> Result<f64> {
        let level = cdf_eval(self.cdf(0, 1), y);
        if level <= 0.0 {
            return Ok(0.0);
        }
        let v = generalized_inverse(self.cdf(0, 0), level)?;
        Ok(cdf_eval(self.cdf(1, 0), v))
    }

    fn build_counterfactual(&self) -> Result<StepDistribution> {
        let mut grid = Vec::new();
        let mut levels = Vec::new();
        for &y in self.cdf(0, 1).jump_points() {
            match self.counterfactual_at(y) {
                Ok(level) => {
                    grid.push(y);
                    levels.push(level);
                }
                Err(Error::BeyondIdentifiedRegion { .. }) => {
                    log::info!("counterfactual CDF truncated at y={y}: outside the identified region");
                    break;
                }
                Err(e) => return Err(e),
            }
        }
        Ok(monotonize(&grid, &levels, true)?.distribution)
    }

    /// Rearranged counterfactual CDF of the treated cell on the jump points
    /// of `F_01`.
    pub fn counterfactual_cdf(&self) -> &StepDistribution {
        &self.counterfactual
    }

    fn check_defective(&self, allow_defective: bool) -> Result<()> {
        if let Some(g) = self.support.defective_groups().next() {
            if !allow_defective {
                return Err(Error::DefectiveMass {
                    group: format!("cell {}", g.label),
                    mass: g.km_mass,
                });
            }
            log::warn!("cell {}: largest observation censored, estimand is truncated", g.label);
        }
        Ok(())
    }

    /// `E[Y_11] - E[F_01^{-1}(F_00(Y_10))]`.
    pub fn att(&self, allow_defective: bool) -> Result<f64> {
        self.check_defective(allow_defective)?;
        let treated: f64 = self.cells[1][1].atoms().map(|(q, w)| q * w).sum();
        let mut counterfactual = 0.0;
        for (q, w) in self.cells[1][0].atoms() {
            counterfactual += w * generalized_inverse(self.cdf(0, 1), cdf_eval(self.cdf(0, 0), q))?;
        }
        Ok(treated - counterfactual)
    }

    pub fn max_level(&self) -> f64 {
        self.cdf(1, 1).total_mass().min(self.counterfactual.total_mass())
    }

    pub fn resolve_y_grid(&self, grid: &Grid, allow_defective: bool) -> Result<Vec<f64>> {
        match grid {
            Grid::Auto => {
                let pooled = self.cdf(1, 1)
                    .jump_points()
                    .iter()
                    .chain(self.cdf(0, 1).jump_points())
                    .copied();
                let points: Vec<f64> = distinct_below(pooled, self.support.tau_h)
                    .into_iter()
                    .filter(|&y| self.counterfactual_at(y).is_ok())
                    .collect();
                if points.is_empty() {
                    return Err(Error::InvalidArgument(
                        "no uncensored outcomes inside the identified region".into(),
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

    pub fn dtt(&self, grid: &[f64]) -> Result<EffectCurve> {
        let values = grid
            .iter()
            .map(|&y| Ok(cdf_eval(self.cdf(1, 1), y) - self.counterfactual_at(y)?))
            .collect::<Result<Vec<_>>>()?;
        EffectCurve::new(EstimandKind::Dtt, grid.to_vec(), values)
    }

    pub fn qtt(&self, tau_grid: &[f64]) -> Result<EffectCurve> {
        let values = tau_grid
            .iter()
            .map(|&tau| {
                Ok(generalized_inverse(self.cdf(1, 1), tau)?
                    - generalized_inverse(&self.counterfactual, tau)?)
            })
            .collect::<Result<Vec<_>>>()?;
        EffectCurve::new(EstimandKind::Qtt, tau_grid.to_vec(), values)
    }

    pub fn diagnostics(&self) -> Diagnostics {
        let mut d = Diagnostics::new(self.support.clone());
        d.masses = self
            .cells
            .iter()
            .flatten()
            .map(|c| (c.label.clone(), c.cdf.total_mass()))
            .chain(std::iter::once((
                "counterfactual".to_string(),
                self.counterfactual.total_mass(),
            )))
            .collect();
        d.warnings = self.warnings.clone();
        d
    }

    pub fn estimate(&self, kind: EstimandKind, options: &EstimationOptions) -> Result<Estimate> {
        let curve = match kind {
            EstimandKind::Att => EffectCurve::scalar(kind, self.att(options.allow_defective)?),
            EstimandKind::Dtt => {
                self.dtt(&self.resolve_y_grid(&options.y_grid, options.allow_defective)?)?
            }
            EstimandKind::Qtt => {
                self.qtt(&resolve_tau_grid(&options.tau_grid, self.max_level())?)?
            }
            other => {
                return Err(Error::InvalidArgument(format!(
                    "{other:?} is not a changes-in-changes estimand"
                )))
            }
        };
        Ok(Estimate {
            curve,
            diagnostics: self.diagnostics(),
        })
    }
}
