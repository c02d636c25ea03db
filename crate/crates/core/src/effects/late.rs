//! Local (complier) treatment effects with a binary instrument.
//!
//! The sample splits into the four `(t, z)` cells, each with its own
//! product-limit weights scaled by `n_tz / n`. Within arm `t` the `z = 1`
//! cell enters with weight `1 / e(X)` and the `z = 0` cell with
//! `-1 / (1 - e(X))`, and the sum is divided by the first stage
//! `kappa_t = mean(Z 1{T=t} / e - (1 - Z) 1{T=t} / (1 - e))`.
//! A single instrument-propensity fit serves all four cells.

use crate::data::{CensoredSample, EffectCurve, EstimandKind};
use crate::dist::{generalized_inverse, monotonize, StepDistribution};
use crate::error::{Error, Result};
use crate::km::{km_weights, order_group, support_diagnostics, KaplanMeierWeights, OrderedGroup, SupportDiagnostics};
use crate::propensity::{PropensityFit, PropensitySpec};

use super::{distinct_below, resolve_tau_grid, Diagnostics, Estimate, EstimationOptions, Grid};

/// `|kappa_t|` below this aborts estimation.
pub const WEAK_FIRST_STAGE: f64 = 0.02;

#[derive(Debug, Clone)]
struct Cell {
    label: String,
    group: OrderedGroup,
    weights: KaplanMeierWeights,
    /// `1 / e` for `z = 1`, `-1 / (1 - e)` for `z = 0`, by ordered position.
    signed_inverse: Vec<f64>,
}

impl Cell {
    fn build(
        sample: &CensoredSample,
        e: &[f64],
        t: bool,
        z: bool,
    ) -> Option<Self> {
        let label = format!("t={},z={}", u8::from(t), u8::from(z));
        let group = order_group(sample, |o| o.t == t && o.z == Some(z)).ok()?;
        let signed_inverse = group
            .original_index()
            .iter()
            .map(|&i| if z { 1.0 / e[i] } else { -1.0 / (1.0 - e[i]) })
            .collect();
        let weights = km_weights(&group);
        Some(Self {
            label,
            group,
            weights,
            signed_inverse,
        })
    }

    fn atoms(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        let q = self.group.sorted_q();
        (0..q.len())
            .filter(|&i| self.weights.jumps()[i] > 0.0)
            .map(move |i| (q[i], self.weights.weight(i) * self.signed_inverse[i]))
    }
}

/// A complier CDF before rearrangement: levels on the union of the arm's
/// uncensored outcomes. Can be non-monotone and leave `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct RawCurve {
    pub grid: Vec<f64>,
    pub levels: Vec<f64>,
}

impl RawCurve {
    pub fn eval(&self, y: f64) -> f64 {
        let idx = self.grid.partition_point(|&p| p <= y);
        if idx == 0 {
            0.0
        } else {
            self.levels[idx - 1]
        }
    }
}

#[derive(Debug, Clone)]
struct ComplierArm {
    raw: RawCurve,
    cdf: StepDistribution,
    clip_magnitude: f64,
}

/// Fitted ingredients of the local estimators.
#[derive(Debug, Clone)]
pub struct LateFit {
    /// Indexed `[t][z]`; `None` for an empty cell, which contributes zero.
    cells: [[Option<Cell>; 2]; 2],
    kappa: [f64; 2],
    arms: [ComplierArm; 2],
    propensity: PropensityFit,
    support: SupportDiagnostics,
}

impl LateFit {
    /// Fits `e(X) = P(Z = 1 | X)` and the four cells.
    pub fn new(sample: &CensoredSample, spec: &PropensitySpec) -> Result<Self> {
        if !sample.schema().has_t {
            return Err(Error::TreatmentRequired);
        }
        let z = sample.instruments()?;
        let propensity = spec.fit(&sample.covariates(), &z)?;
        Self::with_propensity(sample, propensity)
    }

    pub fn with_propensity(sample: &CensoredSample, propensity: PropensityFit) -> Result<Self> {
        let z = sample.instruments()?;
        let e = propensity.fitted();
        if e.len() != sample.len() {
            return Err(Error::DimensionMismatch {
                expected: sample.len(),
                actual: e.len(),
            });
        }
        let n = sample.len() as f64;
        let mut kappa = [0.0; 2];
        for (o, (&zi, &ei)) in sample.observations().iter().zip(z.iter().zip(e)) {
            kappa[usize::from(o.t)] += if zi { 1.0 / ei } else { -1.0 / (1.0 - ei) };
        }
        for (t, k) in kappa.iter_mut().enumerate() {
            *k /= n;
            if k.abs() < WEAK_FIRST_STAGE {
                return Err(Error::WeakFirstStage {
                    arm: t as u8,
                    kappa: *k,
                    threshold: WEAK_FIRST_STAGE,
                });
            }
        }
        let cells = [false, true].map(|t| [false, true].map(|zz| Cell::build(sample, e, t, zz)));
        let support = support_diagnostics(
            cells
                .iter()
                .flatten()
                .flatten()
                .map(|c| (c.label.as_str(), &c.group)),
        );
        let arms = [0, 1].map(|t| complier_arm(&cells[t], kappa[t]));
        let [a0, a1] = arms;
        Ok(Self {
            cells,
            kappa,
            arms: [a0?, a1?],
            propensity,
            support,
        })
    }

    /// First stage `kappa_t`.
    pub fn kappa(&self, treated: bool) -> f64 {
        self.kappa[usize::from(treated)]
    }

    pub fn propensity(&self) -> &PropensityFit {
        &self.propensity
    }

    pub fn support(&self) -> &SupportDiagnostics {
        &self.support
    }

    fn arm_cells(&self, treated: bool) -> impl Iterator<Item = &Cell> {
        self.cells[usize::from(treated)].iter().flatten()
    }

    /// Estimated `E[Y_t | complier]`.
    pub fn complier_mean(&self, treated: bool, allow_defective: bool) -> Result<f64> {
        for c in self.arm_cells(treated).filter(|c| c.group.max_is_censored()) {
            let mass = c.weights.within_mass();
            if !allow_defective {
                return Err(Error::DefectiveMass {
                    group: format!("cell {}", c.label),
                    mass,
                });
            }
            log::warn!("cell {}: largest observation censored, mean is truncated", c.label);
        }
        let sum: f64 = self
            .arm_cells(treated)
            .flat_map(|c| c.atoms())
            .map(|(q, w)| q * w)
            .sum();
        Ok(sum / self.kappa(treated))
    }

    pub fn late(&self, allow_defective: bool) -> Result<f64> {
        Ok(self.complier_mean(true, allow_defective)? - self.complier_mean(false, allow_defective)?)
    }

    /// Unrearranged complier CDF of `Y_t`.
    pub fn raw_complier_cdf(&self, treated: bool) -> &RawCurve {
        &self.arms[usize::from(treated)].raw
    }

    /// Rearranged complier CDF of `Y_t`, clipped to `[0, 1]`.
    pub fn complier_cdf(&self, treated: bool) -> &StepDistribution {
        &self.arms[usize::from(treated)].cdf
    }

    pub fn max_level(&self) -> f64 {
        self.arms
            .iter()
            .map(|a| a.cdf.total_mass())
            .fold(f64::INFINITY, f64::min)
    }

    pub fn resolve_y_grid(&self, grid: &Grid, allow_defective: bool) -> Result<Vec<f64>> {
        match grid {
            Grid::Auto => {
                let pooled = self.arms.iter().flat_map(|a| a.raw.grid.iter().copied());
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

    /// Difference of the unrearranged complier CDFs.
    pub fn ldte(&self, grid: &[f64]) -> Result<EffectCurve> {
        let (r1, r0) = (self.raw_complier_cdf(true), self.raw_complier_cdf(false));
        let values = grid.iter().map(|&y| r1.eval(y) - r0.eval(y)).collect();
        EffectCurve::new(EstimandKind::Ldte, grid.to_vec(), values)
    }

    pub fn lqte(&self, tau_grid: &[f64]) -> Result<EffectCurve> {
        let values = tau_grid
            .iter()
            .map(|&tau| {
                Ok(generalized_inverse(self.complier_cdf(true), tau)?
                    - generalized_inverse(self.complier_cdf(false), tau)?)
            })
            .collect::<Result<Vec<_>>>()?;
        EffectCurve::new(EstimandKind::Lqte, tau_grid.to_vec(), values)
    }

    pub fn diagnostics(&self) -> Diagnostics {
        let mut d = Diagnostics::new(self.support.clone());
        d.propensity = Some(self.propensity.summary());
        d.kappa = Some(self.kappa);
        d.masses = self
            .arms
            .iter()
            .enumerate()
            .map(|(t, a)| (format!("complier t={t}"), a.cdf.total_mass()))
            .collect();
        d.clip_magnitude = self.arms.iter().map(|a| a.clip_magnitude).fold(0.0, f64::max);
        for t in 0..2 {
            for z in 0..2 {
                if self.cells[t][z].is_none() {
                    d.warn(format!("cell t={t},z={z} is empty and contributes zero"));
                }
            }
        }
        d
    }

    pub fn estimate(&self, kind: EstimandKind, options: &EstimationOptions) -> Result<Estimate> {
        let curve = match kind {
            EstimandKind::Late => EffectCurve::scalar(kind, self.late(options.allow_defective)?),
            EstimandKind::Ldte => {
                self.ldte(&self.resolve_y_grid(&options.y_grid, options.allow_defective)?)?
            }
            EstimandKind::Lqte => {
                self.lqte(&resolve_tau_grid(&options.tau_grid, self.max_level())?)?
            }
            other => {
                return Err(Error::InvalidArgument(format!(
                    "{other:?} is not a local estimand"
                )))
            }
        };
        Ok(Estimate {
            curve,
            diagnostics: self.diagnostics(),
        })
    }
}

fn complier_arm(cells: &[Option<Cell>; 2], kappa: f64) -> Result<ComplierArm> {
    let mut atoms: Vec<(f64, f64)> = cells.iter().flatten().flat_map(|c| c.atoms()).collect();
    if atoms.is_empty() {
        return Err(Error::NoUncensored("treatment arm of the local setup".into()));
    }
    atoms.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut grid: Vec<f64> = Vec::new();
    let mut levels: Vec<f64> = Vec::new();
    let mut acc = 0.0;
    for (y, w) in atoms {
        acc += w;
        if grid.last() == Some(&y) {
            *levels.last_mut().unwrap() = acc / kappa;
        } else {
            grid.push(y);
            levels.push(acc / kappa);
        }
    }
    let mono = monotonize(&grid, &levels, true)?;
    if mono.clip_magnitude > 0.0 {
        log::info!("complier CDF clipped to [0, 1] by up to {:.4}", mono.clip_magnitude);
    }
    Ok(ComplierArm {
        raw: RawCurve { grid, levels },
        cdf: mono.distribution,
        clip_magnitude: mono.clip_magnitude,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::Observation;
    use crate::propensity::PropensityMethod;

    fn intercept_only() -> PropensitySpec {
        PropensitySpec::new(PropensityMethod::ParametricLogit)
    }

    fn sample(rows: &[(f64, bool, bool, bool)]) -> CensoredSample {
        CensoredSample::new(
            rows.iter()
                .map(|&(q, d, t, z)| Observation::new(q, d, vec![], t).with_instrument(z))
                .collect(),
        )
        .unwrap()
    }

    fn perfect_compliance() -> CensoredSample {
        sample(&[
            (3.0, true, true, true),
            (5.0, true, true, true),
            (1.0, true, false, false),
            (2.0, true, false, false),
        ])
    }

    #[test]
    fn perfect_compliance_kappas() {
        let fit = LateFit::new(&perfect_compliance(), &intercept_only()).unwrap();
        assert!((fit.kappa(true) - 1.0).abs() < 1e-12);
        assert!((fit.kappa(false) + 1.0).abs() < 1e-12);
    }

    #[test]
    fn perfect_compliance_reduces_to_arm_means() {
        let fit = LateFit::new(&perfect_compliance(), &intercept_only()).unwrap();
        assert!((fit.complier_mean(true, false).unwrap() - 4.0).abs() < 1e-12);
        assert!((fit.complier_mean(false, false).unwrap() - 1.5).abs() < 1e-12);
        assert!((fit.late(false).unwrap() - 2.5).abs() < 1e-12);
        let f1 = fit.complier_cdf(true);
        assert_eq!(f1.jump_points(), &[3.0, 5.0]);
        assert!((f1.total_mass() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn independent_instrument_is_weak() {
        let s = sample(&[
            (1.0, true, true, true),
            (2.0, true, true, false),
            (3.0, true, false, true),
            (4.0, true, false, false),
        ]);
        assert!(matches!(
            LateFit::new(&s, &intercept_only()),
            Err(Error::WeakFirstStage { .. })
        ));
    }

    #[test]
    fn identical_arms_give_zero() {
        let s = sample(&[
            (3.0, true, true, true),
            (5.0, true, true, true),
            (3.0, true, false, false),
            (5.0, true, false, false),
        ]);
        let fit = LateFit::new(&s, &intercept_only()).unwrap();
        assert_eq!(fit.late(false).unwrap(), 0.0);
        assert!(fit.ldte(&[2.0, 3.0, 4.0, 6.0]).unwrap().estimates.iter().all(|v| *v == 0.0));
        assert!(fit.lqte(&[0.25, 0.5, 1.0]).unwrap().estimates.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn missing_instrument_column() {
        let s = CensoredSample::new(vec![Observation::new(1.0, true, vec![], true)]).unwrap();
        assert!(matches!(
            LateFit::new(&s, &intercept_only()),
            Err(Error::InstrumentRequired)
        ));
    }

    #[test]
    fn raw_curve_is_step_function() {
        let r = RawCurve {
            grid: vec![1.0, 2.0],
            levels: vec![0.7, 0.4],
        };
        assert_eq!(r.eval(0.5), 0.0);
        assert_eq!(r.eval(1.5), 0.7);
        assert_eq!(r.eval(9.0), 0.4);
    }
}
