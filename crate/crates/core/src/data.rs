//! Shared domain types: observations, samples, effect curves, and
//! per-estimand validation.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One observed unit.
///
/// `q` is the observed `min(Y, C)` and `delta` is `1{Y <= C}`. The optional
/// indicators are meaningful only when the owning sample's [`Schema`] marks
/// them present.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    pub q: f64,
    pub delta: bool,
    pub x: Vec<f64>,
    pub t: bool,
    pub z: Option<bool>,
    pub g: Option<bool>,
    pub period: Option<bool>,
}

impl Observation {
    /// Minimal treated/control record with covariates.
    pub fn new(q: f64, delta: bool, x: Vec<f64>, t: bool) -> Self {
        Self {
            q,
            delta,
            x,
            t,
            z: None,
            g: None,
            period: None,
        }
    }

    pub fn with_instrument(mut self, z: bool) -> Self {
        self.z = Some(z);
        self
    }

    pub fn with_cell(mut self, g: bool, period: bool) -> Self {
        self.g = Some(g);
        self.period = Some(period);
        self
    }
}

/// Which optional columns a sample carries.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Schema {
    pub k: usize,
    pub has_t: bool,
    pub has_z: bool,
    pub has_g: bool,
    pub has_period: bool,
}

/// A validated, immutable collection of observations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CensoredSample {
    observations: Vec<Observation>,
    schema: Schema,
}

impl CensoredSample {
    /// Builds a sample, inferring the schema from the first row and checking
    /// every other row against it.
    ///
    /// When `t` is not otherwise meaningful (e.g. DID data) callers may leave
    /// it `false`; use [`CensoredSample::with_schema`] to state presence
    /// explicitly.
    pub fn new(observations: Vec<Observation>) -> Result<Self> {
        let first = observations.first().ok_or(Error::EmptySample)?;
        let schema = Schema {
            k: first.x.len(),
            has_t: true,
            has_z: first.z.is_some(),
            has_g: first.g.is_some(),
            has_period: first.period.is_some(),
        };
        Self::with_schema(observations, schema)
    }

    pub fn with_schema(mut observations: Vec<Observation>, schema: Schema) -> Result<Self> {
        if observations.is_empty() {
            return Err(Error::EmptySample);
        }
        for obs in &mut observations {
            // -0.0 and 0.0 compare equal but sort apart under total_cmp
            obs.q += 0.0;
        }
        for (row, obs) in observations.iter().enumerate() {
            if !obs.q.is_finite() {
                return Err(Error::NonNumeric {
                    column: "q".into(),
                    row,
                    value: obs.q.to_string(),
                });
            }
            if obs.x.len() != schema.k {
                return Err(Error::DimensionMismatch {
                    expected: schema.k,
                    actual: obs.x.len(),
                });
            }
            if let Some(j) = obs.x.iter().position(|v| !v.is_finite()) {
                return Err(Error::NonNumeric {
                    column: format!("x{}", j + 1),
                    row,
                    value: obs.x[j].to_string(),
                });
            }
            for (name, present, value) in [
                ("z", schema.has_z, obs.z.is_some()),
                ("g", schema.has_g, obs.g.is_some()),
                ("period", schema.has_period, obs.period.is_some()),
            ] {
                if present != value {
                    return Err(Error::MissingValue {
                        column: name.into(),
                        row,
                    });
                }
            }
        }
        Ok(Self {
            observations,
            schema,
        })
    }

    pub fn observations(&self) -> &[Observation] {
        &self.observations
    }

    pub fn schema(&self) -> Schema {
        self.schema
    }

    pub fn len(&self) -> usize {
        self.observations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.observations.is_empty()
    }

    pub fn covariate_dim(&self) -> usize {
        self.schema.k
    }

    /// Covariate rows in sample order.
    pub fn covariates(&self) -> Vec<Vec<f64>> {
        self.observations.iter().map(|o| o.x.clone()).collect()
    }

    pub fn treatments(&self) -> Vec<bool> {
        self.observations.iter().map(|o| o.t).collect()
    }

    /// Instrument column, or [`Error::InstrumentRequired`].
    pub fn instruments(&self) -> Result<Vec<bool>> {
        if !self.schema.has_z {
            return Err(Error::InstrumentRequired);
        }
        Ok(self.observations.iter().map(|o| o.z == Some(true)).collect())
    }

    pub fn censoring_fraction(&self) -> f64 {
        let censored = self.observations.iter().filter(|o| !o.delta).count();
        censored as f64 / self.len() as f64
    }

    /// Rebuilds a sample from rows drawn from this one, keeping the schema.
    pub fn from_rows_of(&self, observations: Vec<Observation>) -> Result<Self> {
        Self::with_schema(observations, self.schema)
    }

    /// Same rows with every outcome marked uncensored.
    pub fn with_all_uncensored(&self) -> Self {
        let observations = self
            .observations
            .iter()
            .map(|o| Observation {
                delta: true,
                ..o.clone()
            })
            .collect();
        Self {
            observations,
            schema: self.schema,
        }
    }

    /// Rows with `delta = 1` only.
    pub fn uncensored_only(&self) -> Result<Self> {
        let rows: Vec<_> = self
            .observations
            .iter()
            .filter(|o| o.delta)
            .cloned()
            .collect();
        if rows.is_empty() {
            return Err(Error::EmptyGroup("uncensored subsample".into()));
        }
        Self::with_schema(rows, self.schema)
    }
}

/// Which treatment-effect parameter is being estimated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum EstimandKind {
    Ate,
    Dte,
    Qte,
    Late,
    Ldte,
    Lqte,
    Att,
    Dtt,
    Qtt,
}

/// Identification setup an estimand belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Setup {
    Unconfounded,
    Local,
    ChangesInChanges,
}

impl EstimandKind {
    pub fn setup(self) -> Setup {
        use EstimandKind::*;
        match self {
            Ate | Dte | Qte => Setup::Unconfounded,
            Late | Ldte | Lqte => Setup::Local,
            Att | Dtt | Qtt => Setup::ChangesInChanges,
        }
    }

    pub fn is_scalar(self) -> bool {
        matches!(self, EstimandKind::Ate | EstimandKind::Late | EstimandKind::Att)
    }

    /// Whether the curve is indexed by quantile levels rather than outcome levels.
    pub fn is_quantile(self) -> bool {
        matches!(self, EstimandKind::Qte | EstimandKind::Lqte | EstimandKind::Qtt)
    }

    pub fn parse(s: &str) -> Option<Self> {
        use EstimandKind::*;
        Some(match s.to_ascii_lowercase().as_str() {
            "ate" => Ate,
            "dte" => Dte,
            "qte" => Qte,
            "late" => Late,
            "ldte" => Ldte,
            "lqte" => Lqte,
            "att" => Att,
            "dtt" => Dtt,
            "qtt" => Qtt,
            _ => return None,
        })
    }
}

/// Estimand values over a grid of outcome levels or quantile levels.
///
/// Scalar estimands use a length-1 grid holding `0.0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EffectCurve {
    pub kind: EstimandKind,
    pub grid: Vec<f64>,
    pub estimates: Vec<f64>,
    pub band_halfwidth: Option<f64>,
    pub alpha: Option<f64>,
}

impl EffectCurve {
    pub fn new(kind: EstimandKind, grid: Vec<f64>, estimates: Vec<f64>) -> Result<Self> {
        if grid.len() != estimates.len() {
            return Err(Error::DimensionMismatch {
                expected: grid.len(),
                actual: estimates.len(),
            });
        }
        if grid.windows(2).any(|w| w[0] > w[1]) {
            return Err(Error::InvalidArgument("grid must be ascending".into()));
        }
        Ok(Self {
            kind,
            grid,
            estimates,
            band_halfwidth: None,
            alpha: None,
        })
    }

    pub fn scalar(kind: EstimandKind, value: f64) -> Self {
        Self {
            kind,
            grid: vec![0.0],
            estimates: vec![value],
            band_halfwidth: None,
            alpha: None,
        }
    }

    /// The single value of a scalar estimand.
    pub fn value(&self) -> f64 {
        self.estimates[0]
    }

    pub fn with_band(mut self, halfwidth: f64, alpha: f64) -> Self {
        self.band_halfwidth = Some(halfwidth);
        self.alpha = Some(alpha);
        self
    }
}

/// One requirement checked by [`validate_for_estimand`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Requirement {
    pub name: String,
    pub passed: bool,
    pub message: String,
}

/// Size and censoring summary of one estimation group.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GroupCount {
    pub label: String,
    pub size: usize,
    pub censoring_fraction: f64,
}

/// Outcome of [`validate_for_estimand`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValidationReport {
    pub kind: EstimandKind,
    pub n: usize,
    pub groups: Vec<GroupCount>,
    pub requirements: Vec<Requirement>,
}

impl ValidationReport {
    pub fn passed(&self) -> bool {
        self.requirements.iter().all(|r| r.passed)
    }

    /// Converts the first failed requirement into its error.
    pub fn ensure(&self) -> Result<()> {
        match self.requirements.iter().find(|r| !r.passed) {
            None => Ok(()),
            Some(r) => Err(match r.name.as_str() {
                "instrument" => Error::InstrumentRequired,
                "treatment" => Error::TreatmentRequired,
                "did_columns" => Error::DidColumnsRequired,
                _ => Error::EmptyGroup(r.message.clone()),
            }),
        }
    }

    fn require(&mut self, name: &str, passed: bool, message: impl Into<String>) {
        self.requirements.push(Requirement {
            name: name.into(),
            passed,
            message: message.into(),
        });
    }
}

fn group_count<F>(sample: &CensoredSample, label: &str, pred: F) -> GroupCount
where
    F: Fn(&Observation) -> bool,
{
    let (size, censored) = sample
        .observations()
        .iter()
        .filter(|o| pred(o))
        .fold((0usize, 0usize), |(n, c), o| (n + 1, c + usize::from(!o.delta)));
    GroupCount {
        label: label.into(),
        size,
        censoring_fraction: if size == 0 {
            0.0
        } else {
            censored as f64 / size as f64
        },
    }
}

/// Checks that `sample` carries the columns and non-empty cells that
/// `kind` needs. Never mutates the sample and never errors; use
/// [`ValidationReport::ensure`] to turn a failure into an [`Error`].
///
/// For the local (instrument) setup the four `(t, z)` cells are reported but
/// only the two treatment arms and the two instrument levels must be
/// non-empty: under one-sided or perfect compliance some cells are
/// legitimately empty and contribute zero.
pub fn validate_for_estimand(sample: &CensoredSample, kind: EstimandKind) -> ValidationReport {
    let schema = sample.schema();
    let mut report = ValidationReport {
        kind,
        n: sample.len(),
        groups: Vec::new(),
        requirements: Vec::new(),
    };
    match kind.setup() {
        Setup::Unconfounded => {
            report.require("treatment", schema.has_t, "treatment column required");
            if schema.has_t {
                for t in [1u8, 0] {
                    let c = group_count(sample, &format!("t={t}"), |o| o.t == (t == 1));
                    report.require(
                        &format!("arm_t{t}"),
                        c.size > 0,
                        format!("treatment arm t={t} is empty"),
                    );
                    report.groups.push(c);
                }
            }
        }
        Setup::Local => {
            report.require("treatment", schema.has_t, "treatment column required");
            report.require("instrument", schema.has_z, "instrument column required");
            if schema.has_t && schema.has_z {
                for t in [1u8, 0] {
                    for z in [1u8, 0] {
                        report.groups.push(group_count(
                            sample,
                            &format!("t={t},z={z}"),
                            |o| o.t == (t == 1) && o.z == Some(z == 1),
                        ));
                    }
                }
                for t in [1u8, 0] {
                    let size = group_count(sample, "", |o| o.t == (t == 1)).size;
                    report.require(
                        &format!("arm_t{t}"),
                        size > 0,
                        format!("treatment arm t={t} is empty"),
                    );
                }
                for z in [1u8, 0] {
                    let size = group_count(sample, "", |o| o.z == Some(z == 1)).size;
                    report.require(
                        &format!("instrument_z{z}"),
                        size > 0,
                        format!("instrument level z={z} is empty"),
                    );
                }
            }
        }
        Setup::ChangesInChanges => {
            let present = schema.has_g && schema.has_period;
            report.require("did_columns", present, "group and period columns required");
            if present {
                for g in [1u8, 0] {
                    for j in [1u8, 0] {
                        let c = group_count(sample, &format!("g={g},period={j}"), |o| {
                            o.g == Some(g == 1) && o.period == Some(j == 1)
                        });
                        report.require(
                            &format!("cell_g{g}_p{j}"),
                            c.size > 0,
                            format!("cell (g={g}, period={j}) is empty; P(G=g,I=j)>0 fails"),
                        );
                        report.groups.push(c);
                    }
                }
            }
        }
    }
    report
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unconfounded(n1: usize, n0: usize) -> CensoredSample {
        let rows = (0..n1 + n0)
            .map(|i| Observation::new(i as f64, i % 3 != 0, vec![], i < n1))
            .collect();
        CensoredSample::new(rows).unwrap()
    }

    #[test]
    fn unconfounded_sample_passes() {
        let s = unconfounded(500, 500);
        let r = validate_for_estimand(&s, EstimandKind::Ate);
        assert!(r.passed());
        assert_eq!(r.groups[0].size, 500);
        assert_eq!(r.groups[1].size, 500);
    }

    #[test]
    fn negative_zero_outcome_is_normalized() {
        let s = CensoredSample::new(vec![Observation::new(-0.0, false, vec![], true)]).unwrap();
        assert!(s.observations()[0].q.is_sign_positive());
    }

    #[test]
    fn late_without_instrument_fails() {
        let s = unconfounded(5, 5);
        let r = validate_for_estimand(&s, EstimandKind::Late);
        assert!(!r.passed());
        let err = r.ensure().unwrap_err();
        assert_eq!(err.to_string(), "instrument column required");
    }

    #[test]
    fn cic_with_empty_cell_fails() {
        let rows = vec![
            Observation::new(1.0, true, vec![], false).with_cell(false, false),
            Observation::new(2.0, true, vec![], false).with_cell(false, true),
            Observation::new(3.0, true, vec![], true).with_cell(true, true),
        ];
        let s = CensoredSample::new(rows).unwrap();
        let before = s.clone();
        let r = validate_for_estimand(&s, EstimandKind::Att);
        assert!(!r.passed());
        let failed: Vec<_> = r.requirements.iter().filter(|r| !r.passed).collect();
        assert_eq!(failed.len(), 1);
        assert_eq!(failed[0].name, "cell_g1_p0");
        assert!(r.ensure().is_err());
        assert_eq!(s, before);
    }

    #[test]
    fn inconsistent_covariate_dimension_rejected() {
        let rows = vec![
            Observation::new(1.0, true, vec![0.0], true),
            Observation::new(2.0, true, vec![], false),
        ];
        assert!(matches!(
            CensoredSample::new(rows),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn effect_curve_rejects_length_mismatch() {
        assert!(EffectCurve::new(EstimandKind::Dte, vec![1.0, 2.0], vec![0.0]).is_err());
    }
}
