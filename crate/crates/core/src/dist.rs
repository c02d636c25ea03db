//! Right-continuous step distributions and the operations every quantile and
//! changes-in-changes formula is built from: evaluation, generalized inverse,
//! monotone rearrangement, composition and means.

use serde::Serialize;

use crate::data::EffectCurve;
use crate::error::{Error, Result};
use crate::EPS_NUM;

/// CDF levels within this distance of a target quantile level count as
/// reaching it. Absorbs summation-order roundoff between two routes to the
/// same CDF value; far below any genuine gap between distinct levels.
pub const LEVEL_TOL: f64 = 1e-12;

/// Discrete measure on strictly ascending jump points with positive masses.
///
/// Cumulative levels are stored alongside the masses. When built with
/// [`StepDistribution::from_cumulative`] the supplied levels are kept
/// verbatim rather than re-summed.
///
/// Total mass is not forced to be `<= 1`: product-limit distributions are
/// (see [`StepDistribution::is_proper`]) but inverse-probability-weighted ones
/// may overshoot slightly in finite samples.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StepDistribution {
    jump_points: Vec<f64>,
    masses: Vec<f64>,
    cumulative: Vec<f64>,
}

impl StepDistribution {
    pub fn empty() -> Self {
        Self {
            jump_points: Vec::new(),
            masses: Vec::new(),
            cumulative: Vec::new(),
        }
    }

    /// Builds from explicit jumps. Points must be strictly ascending and
    /// masses strictly positive and finite.
    pub fn from_masses(jump_points: Vec<f64>, masses: Vec<f64>) -> Result<Self> {
        if jump_points.len() != masses.len() {
            return Err(Error::DimensionMismatch {
                expected: jump_points.len(),
                actual: masses.len(),
            });
        }
        check_ascending(&jump_points)?;
        if let Some(m) = masses.iter().find(|m| !(m.is_finite() && **m > 0.0)) {
            return Err(Error::InvalidArgument(format!("jump mass must be positive, got {m}")));
        }
        let cumulative = masses
            .iter()
            .scan(0.0, |acc, m| {
                *acc += m;
                Some(*acc)
            })
            .collect();
        Ok(Self {
            jump_points,
            masses,
            cumulative,
        })
    }

    /// Aggregates possibly unsorted, possibly tied atoms. Zero-mass atoms are
    /// dropped; negative masses are rejected.
    pub fn from_atoms(atoms: impl IntoIterator<Item = (f64, f64)>) -> Result<Self> {
        let mut atoms: Vec<_> = atoms.into_iter().collect();
        atoms.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut points: Vec<f64> = Vec::new();
        let mut masses: Vec<f64> = Vec::new();
        for (y, m) in atoms {
            if m < 0.0 || !m.is_finite() {
                return Err(Error::InvalidArgument(format!("atom mass must be >= 0, got {m}")));
            }
            match points.last() {
                Some(&last) if last == y => *masses.last_mut().unwrap() += m,
                _ => {
                    points.push(y);
                    masses.push(m);
                }
            }
        }
        let (points, masses): (Vec<_>, Vec<_>) = points
            .into_iter()
            .zip(masses)
            .filter(|(_, m)| *m > 0.0)
            .unzip();
        Self::from_masses(points, masses)
    }

    /// Builds from cumulative levels on an ascending grid. Levels must be
    /// nondecreasing; grid points where the level does not increase are
    /// dropped. The retained levels are stored exactly as given.
    pub fn from_cumulative(grid: &[f64], levels: &[f64]) -> Result<Self> {
        if grid.len() != levels.len() {
            return Err(Error::DimensionMismatch {
                expected: grid.len(),
                actual: levels.len(),
            });
        }
        check_ascending(grid)?;
        let mut out = Self::empty();
        let mut prev = 0.0;
        for (&y, &level) in grid.iter().zip(levels) {
            if !level.is_finite() || level < prev {
                return Err(Error::InvalidArgument(format!(
                    "cumulative levels must be nondecreasing, got {level} after {prev}"
                )));
            }
            if level > prev {
                out.jump_points.push(y);
                out.masses.push(level - prev);
                out.cumulative.push(level);
                prev = level;
            }
        }
        Ok(out)
    }

    pub fn jump_points(&self) -> &[f64] {
        &self.jump_points
    }

    pub fn masses(&self) -> &[f64] {
        &self.masses
    }

    /// CDF level at each jump point.
    pub fn levels(&self) -> &[f64] {
        &self.cumulative
    }

    pub fn total_mass(&self) -> f64 {
        self.cumulative.last().copied().unwrap_or(0.0)
    }

    pub fn is_empty(&self) -> bool {
        self.jump_points.is_empty()
    }

    /// Total mass at most one (up to [`EPS_NUM`]).
    pub fn is_proper(&self) -> bool {
        self.total_mass() <= 1.0 + EPS_NUM
    }

    /// Right-continuous CDF value at `y`.
    pub fn cdf(&self, y: f64) -> f64 {
        cdf_eval(self, y)
    }

    /// The distribution as a curve of levels over its jump points.
    pub fn to_curve(&self, kind: crate::data::EstimandKind) -> EffectCurve {
        EffectCurve {
            kind,
            grid: self.jump_points.clone(),
            estimates: self.cumulative.clone(),
            band_halfwidth: None,
            alpha: None,
        }
    }
}

fn check_ascending(points: &[f64]) -> Result<()> {
    if points.iter().any(|p| !p.is_finite()) {
        return Err(Error::InvalidArgument("jump points must be finite".into()));
    }
    if points.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidArgument(
            "jump points must be strictly ascending".into(),
        ));
    }
    Ok(())
}

/// Sum of masses at jump points `<= y`.
pub fn cdf_eval(dist: &StepDistribution, y: f64) -> f64 {
    let idx = dist.jump_points.partition_point(|&p| p <= y);
    if idx == 0 {
        0.0
    } else {
        dist.cumulative[idx - 1]
    }
}

/// `inf { y : F(y) >= tau }` over the jump points.
///
/// `tau <= 0` returns the smallest jump point: the infimum over all reals
/// would be `-inf`, and the observed support is the only data-driven
/// restriction. Levels within [`LEVEL_TOL`] of `tau` count as reaching it.
pub fn generalized_inverse(dist: &StepDistribution, tau: f64) -> Result<f64> {
    if tau.is_nan() {
        return Err(Error::InvalidArgument("tau is NaN".into()));
    }
    let mass = dist.total_mass();
    if dist.is_empty() || tau > mass + LEVEL_TOL {
        return Err(Error::BeyondIdentifiedRegion { tau, mass });
    }
    if tau <= 0.0 {
        log::debug!("generalized inverse at tau={tau}: using smallest jump point");
        return Ok(dist.jump_points[0]);
    }
    let idx = dist.cumulative.partition_point(|&c| c < tau - LEVEL_TOL);
    Ok(dist.jump_points[idx.min(dist.jump_points.len() - 1)])
}

/// Monotone rearrangement: the estimates sorted ascending over the same grid.
pub fn rearrange(curve: &EffectCurve) -> EffectCurve {
    let mut out = curve.clone();
    out.estimates.sort_by(|a, b| a.total_cmp(b));
    out
}

/// Result of turning an arbitrary estimated CDF curve into a distribution.
#[derive(Debug, Clone)]
pub struct Monotonized {
    pub distribution: StepDistribution,
    /// Largest distance any rearranged level was moved by clipping to `[0, 1]`.
    pub clip_magnitude: f64,
}

/// Rearranges a CDF curve, optionally clips it to `[0, 1]`, and returns the
/// resulting step distribution.
pub fn monotonize(grid: &[f64], levels: &[f64], clip: bool) -> Result<Monotonized> {
    let mut sorted = levels.to_vec();
    sorted.sort_by(|a, b| a.total_cmp(b));
    let mut clip_magnitude: f64 = 0.0;
    if clip {
        for v in &mut sorted {
            let c = v.clamp(0.0, 1.0);
            clip_magnitude = clip_magnitude.max((c - *v).abs());
            *v = c;
        }
    } else if let Some(v) = sorted.iter_mut().find(|v| **v < 0.0) {
        return Err(Error::InvalidArgument(format!(
            "negative CDF level {v} requires clipping"
        )));
    }
    Ok(Monotonized {
        distribution: StepDistribution::from_cumulative(grid, &sorted)?,
        clip_magnitude,
    })
}

/// `F_outer^{-1}(F_inner(y))`.
pub fn compose_counterfactual(
    inner: &StepDistribution,
    outer: &StepDistribution,
    y: f64,
) -> Result<f64> {
    generalized_inverse(outer, cdf_eval(inner, y))
}

/// Mean of the discrete measure, `sum(point * mass)`.
///
/// A total mass away from one (beyond [`EPS_NUM`]) is an error unless
/// `allow_defective` is set, in which case the truncated mean is returned.
pub fn km_mean(dist: &StepDistribution, allow_defective: bool) -> Result<f64> {
    let mass = dist.total_mass();
    if (mass - 1.0).abs() > EPS_NUM {
        if !allow_defective {
            return Err(Error::DefectiveMass {
                group: "distribution".into(),
                mass,
            });
        }
        log::warn!("mean of distribution with total mass {mass}: truncated estimand");
    }
    Ok(dist
        .jump_points
        .iter()
        .zip(&dist.masses)
        .map(|(y, m)| y * m)
        .sum())
}
