//! Monte Carlo study: bias and RMSE of the two-step Kaplan-Meier estimators
//! and two naive inverse-probability-weighted baselines.

use std::fmt;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::data::CensoredSample;
use crate::effects::UnconfoundedFit;
use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::propensity::PropensitySpec;
use crate::rng::child_stream;

use super::design::{generate, DesignSpec, Dgp};

/// A cell is flagged when more than this share of its replicates failed.
pub const FLAG_FAILURE_SHARE: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Estimator {
    #[serde(rename = "2SKM")]
    TwoStepKm,
    /// Treats every `Q` as an uncensored outcome.
    Ignore,
    /// Drops the censored rows and treats the rest as the sample.
    Uncens,
}

impl Estimator {
    pub const ALL: [Estimator; 3] = [Estimator::TwoStepKm, Estimator::Ignore, Estimator::Uncens];

    pub fn label(self) -> &'static str {
        match self {
            Estimator::TwoStepKm => "2SKM",
            Estimator::Ignore => "Ignore",
            Estimator::Uncens => "Uncens",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|e| e.label().eq_ignore_ascii_case(s))
    }
}

impl fmt::Display for Estimator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Target {
    #[serde(rename = "E(Y1)")]
    MeanY1,
    #[serde(rename = "E(Y0)")]
    MeanY0,
    #[serde(rename = "Q(Y1,0.5)")]
    MedianY1,
    #[serde(rename = "Q(Y0,0.5)")]
    MedianY0,
    #[serde(rename = "ATE")]
    Ate,
    #[serde(rename = "QTE(0.5)")]
    Qte50,
}

impl Target {
    pub const ALL: [Target; 6] = [
        Target::MeanY1,
        Target::MeanY0,
        Target::MedianY1,
        Target::MedianY0,
        Target::Ate,
        Target::Qte50,
    ];

    pub fn label(self) -> &'static str {
        match self {
            Target::MeanY1 => "E(Y1)",
            Target::MeanY0 => "E(Y0)",
            Target::MedianY1 => "Q(Y1,0.5)",
            Target::MedianY0 => "Q(Y0,0.5)",
            Target::Ate => "ATE",
            Target::Qte50 => "QTE(0.5)",
        }
    }

    /// Analytic value, the same in every design.
    pub fn truth(self) -> f64 {
        match self {
            Target::MeanY1 | Target::MedianY1 | Target::Ate | Target::Qte50 => 1.0,
            Target::MeanY0 | Target::MedianY0 => 0.0,
        }
    }
}

/// The six targets from one fit, in [`Target::ALL`] order. Means are the
/// truncated versions when an arm's largest observation is censored.
pub fn estimate_targets(fit: &UnconfoundedFit) -> Result<[f64; 6]> {
    let m1 = fit.potential_mean(true, true)?;
    let m0 = fit.potential_mean(false, true)?;
    let q1 = fit.potential_quantile(true, 0.5)?;
    let q0 = fit.potential_quantile(false, 0.5)?;
    Ok([m1, m0, q1, q0, m1 - m0, q1 - q0])
}

/// IPW estimates treating every observed `Q` as the outcome.
pub fn naive_ignore(sample: &CensoredSample, spec: &PropensitySpec) -> Result<[f64; 6]> {
    estimate_targets(&UnconfoundedFit::new(&sample.with_all_uncensored(), spec)?)
}

/// IPW estimates on the uncensored rows only, with the propensity score
/// refit on those rows.
pub fn naive_uncensored(sample: &CensoredSample, spec: &PropensitySpec) -> Result<[f64; 6]> {
    estimate_targets(&UnconfoundedFit::new(&sample.uncensored_only()?, spec)?)
}

pub fn run_estimator(
    estimator: Estimator,
    sample: &CensoredSample,
    spec: &PropensitySpec,
) -> Result<[f64; 6]> {
    match estimator {
        Estimator::TwoStepKm => estimate_targets(&UnconfoundedFit::new(sample, spec)?),
        Estimator::Ignore => naive_ignore(sample, spec),
        Estimator::Uncens => naive_uncensored(sample, spec),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyConfig {
    pub designs: Vec<Dgp>,
    pub censoring: Vec<f64>,
    pub reps: usize,
    pub n: usize,
    pub estimators: Vec<Estimator>,
    pub propensity: PropensitySpec,
    pub seed: u64,
    #[serde(default)]
    pub execution: Execution,
}

impl StudyConfig {
    /// All four designs at 0, 10% and 30% censoring, 1000 replicates of
    /// `n = 1000`, series logit on `1, X, X^2, X^3`.
    pub fn full(seed: u64) -> Self {
        Self {
            designs: Dgp::ALL.to_vec(),
            censoring: vec![0.0, 0.10, 0.30],
            reps: 1000,
            n: 1000,
            estimators: Estimator::ALL.to_vec(),
            propensity: PropensitySpec::default(),
            seed,
            execution: Execution::default(),
        }
    }

    fn validate(&self) -> Result<()> {
        if self.reps == 0 {
            return Err(Error::InvalidArgument("reps must be >= 1".into()));
        }
        if self.designs.is_empty() || self.censoring.is_empty() || self.estimators.is_empty() {
            return Err(Error::InvalidArgument(
                "designs, censoring levels and estimators must be non-empty".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReportRow {
    pub design: u8,
    pub censoring: f64,
    pub estimator: Estimator,
    pub target: Target,
    pub bias_pp: f64,
    pub rmse: f64,
    /// Monte Carlo standard error of `bias_pp`.
    pub mc_se_pp: f64,
    /// Successful replicates.
    pub reps: usize,
    pub failures: usize,
    pub flagged: bool,
}

/// Per design and censoring level.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CellSummary {
    pub design: u8,
    pub target_censoring: f64,
    pub censoring_rate: f64,
    pub realized_censoring: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimulationReport {
    pub config: StudyConfig,
    pub cells: Vec<CellSummary>,
    pub rows: Vec<ReportRow>,
}

impl SimulationReport {
    pub fn row(&self, design: Dgp, censoring: f64, estimator: Estimator, target: Target) -> Option<&ReportRow> {
        self.rows.iter().find(|r| {
            r.design == design.id()
                && r.censoring == censoring
                && r.estimator == estimator
                && r.target == target
        })
    }

    /// Table-1-shaped CSV: `design,censoring,estimator,target,bias_pp,rmse,reps,failures`.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["design", "censoring", "estimator", "target", "bias_pp", "rmse", "reps", "failures"])?;
        for r in &self.rows {
            w.write_record([
                r.design.to_string(),
                r.censoring.to_string(),
                r.estimator.to_string(),
                r.target.label().to_string(),
                format!("{:.4}", r.bias_pp),
                format!("{:.6}", r.rmse),
                r.reps.to_string(),
                r.failures.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

struct Replicate {
    censoring: f64,
    estimates: Vec<Result<[f64; 6]>>,
}

/// Runs every design and censoring level. Replicate `r` of design `d` at
/// censoring `c` draws from the child stream `(d, round(1000 c), r)` of the
/// study seed, so results do not depend on execution order.
pub fn run_study(config: &StudyConfig) -> Result<SimulationReport> {
    config.validate()?;
    let mut cells = Vec::new();
    let mut rows = Vec::new();
    for &dgp in &config.designs {
        for &censoring in &config.censoring {
            let spec = DesignSpec::new(dgp, config.n, censoring)?;
            log::info!(
                "design {} censoring {censoring}: rate {:.5}, {} reps",
                dgp.id(),
                spec.censoring_rate,
                config.reps
            );
            let reps: Vec<Replicate> = config.execution.map_indexed(config.reps, |r| {
                let path = [u64::from(dgp.id()), (censoring * 1000.0).round() as u64, r as u64];
                let sample = generate(&spec, &mut child_stream(config.seed, &path));
                Replicate {
                    censoring: sample.censoring_fraction(),
                    estimates: config
                        .estimators
                        .iter()
                        .map(|&e| run_estimator(e, &sample, &config.propensity))
                        .collect(),
                }
            });
            cells.push(CellSummary {
                design: dgp.id(),
                target_censoring: censoring,
                censoring_rate: spec.censoring_rate,
                realized_censoring: reps.iter().map(|r| r.censoring).sum::<f64>() / reps.len() as f64,
            });
            for (k, &estimator) in config.estimators.iter().enumerate() {
                let ok: Vec<&[f64; 6]> = reps.iter().filter_map(|r| r.estimates[k].as_ref().ok()).collect();
                let failures = reps.len() - ok.len();
                if let Some(err) = reps.iter().find_map(|r| r.estimates[k].as_ref().err()) {
                    log::warn!(
                        "design {} censoring {censoring} {estimator}: {failures} failed replicates (first: {err})",
                        dgp.id()
                    );
                }
                let flagged = failures as f64 > FLAG_FAILURE_SHARE * reps.len() as f64;
                for (j, &target) in Target::ALL.iter().enumerate() {
                    rows.push(summarize(dgp, censoring, estimator, target, ok.iter().map(|e| e[j]), failures, flagged));
                }
            }
        }
    }
    Ok(SimulationReport {
        config: config.clone(),
        cells,
        rows,
    })
}

fn summarize(
    dgp: Dgp,
    censoring: f64,
    estimator: Estimator,
    target: Target,
    estimates: impl Iterator<Item = f64>,
    failures: usize,
    flagged: bool,
) -> ReportRow {
    let errors: Vec<f64> = estimates.map(|v| v - target.truth()).collect();
    let m = errors.len() as f64;
    let (bias, rmse, se) = if errors.is_empty() {
        (f64::NAN, f64::NAN, f64::NAN)
    } else {
        let mean = errors.iter().sum::<f64>() / m;
        let mse = errors.iter().map(|e| e * e).sum::<f64>() / m;
        let var = if errors.len() > 1 {
            errors.iter().map(|e| (e - mean).powi(2)).sum::<f64>() / (m - 1.0)
        } else {
            0.0
        };
        (mean, mse.sqrt(), (var / m).sqrt())
    };
    ReportRow {
        design: dgp.id(),
        censoring,
        estimator,
        target,
        bias_pp: 100.0 * bias,
        rmse,
        mc_se_pp: 100.0 * se,
        reps: errors.len(),
        failures,
        flagged,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(seed: u64, censoring: Vec<f64>) -> StudyConfig {
        StudyConfig {
            designs: vec![Dgp::One],
            censoring,
            reps: 4,
            n: 200,
            estimators: Estimator::ALL.to_vec(),
            propensity: PropensitySpec::default(),
            seed,
            execution: Execution::Parallel,
        }
    }

    #[test]
    fn reproducible_and_execution_independent() {
        let a = run_study(&small(5, vec![0.1])).unwrap();
        let b = run_study(&small(5, vec![0.1])).unwrap();
        let mut seq = small(5, vec![0.1]);
        seq.execution = Execution::Sequential;
        let c = run_study(&seq).unwrap();
        assert_eq!(a.rows, b.rows);
        assert_eq!(a.rows, c.rows);
        assert_eq!(a.rows.len(), 3 * 6);
    }

    #[test]
    fn estimators_coincide_without_censoring() {
        let spec = DesignSpec::new(Dgp::Three, 300, 0.0).unwrap();
        let s = generate(&spec, &mut child_stream(8, &[0]));
        let p = PropensitySpec::default();
        let km = run_estimator(Estimator::TwoStepKm, &s, &p).unwrap();
        assert_eq!(km, naive_ignore(&s, &p).unwrap());
        assert_eq!(km, naive_uncensored(&s, &p).unwrap());
    }

    #[test]
    fn csv_has_table_columns() {
        let r = run_study(&small(1, vec![0.0])).unwrap();
        let mut buf = Vec::new();
        r.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), "design,censoring,estimator,target,bias_pp,rmse,reps,failures");
        assert_eq!(lines.count(), 18);
        assert!(text.contains("1,0,2SKM,ATE,"));
    }

    #[test]
    fn zero_reps_rejected() {
        let mut c = small(1, vec![0.0]);
        c.reps = 0;
        assert!(run_study(&c).is_err());
    }

    #[test]
    fn truths_are_analytic() {
        assert_eq!(Target::Ate.truth(), 1.0);
        assert_eq!(Target::MedianY0.truth(), 0.0);
        assert_eq!(Estimator::parse("2skm"), Some(Estimator::TwoStepKm));
    }
}
