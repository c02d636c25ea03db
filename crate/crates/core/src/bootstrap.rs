//! Nonparametric bootstrap uniform confidence bands.
//!
//! Replicate `b` resamples the rows with replacement, re-runs the estimator
//! (refitting any nuisance such as the propensity score) and records
//! `L_b = sqrt(n) * max_grid |replicate - original|`. The band is
//! `estimate +/- c / sqrt(n)` with `c` the empirical `1 - alpha` quantile
//! of the `L_b`.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::data::{CensoredSample, EffectCurve};
use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::rng::{child_stream, StreamRng};

/// Replicates may fail (say, an empty arm in a resample); more than this
/// share of failures aborts.
pub const MAX_FAILED_SHARE: f64 = 0.10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BootstrapSpec {
    pub replicates: usize,
    pub alpha: f64,
    pub seed: u64,
    #[serde(default)]
    pub execution: Execution,
}

impl BootstrapSpec {
    pub fn new(seed: u64) -> Self {
        Self {
            replicates: 999,
            alpha: 0.05,
            seed,
            execution: Execution::default(),
        }
    }

    pub fn with_replicates(mut self, replicates: usize) -> Self {
        self.replicates = replicates;
        self
    }

    pub fn with_alpha(mut self, alpha: f64) -> Self {
        self.alpha = alpha;
        self
    }

    pub fn with_execution(mut self, execution: Execution) -> Self {
        self.execution = execution;
        self
    }

    fn validate(&self) -> Result<()> {
        if self.replicates == 0 {
            return Err(Error::InvalidArgument("bootstrap needs at least one replicate".into()));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::InvalidArgument(format!("alpha must lie in (0, 1), got {}", self.alpha)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BandResult {
    pub alpha: f64,
    pub critical_value: f64,
    pub band_halfwidth: f64,
    /// `L_b` of the successful replicates, in replicate order.
    pub replicate_sup_stats: Vec<f64>,
    pub failed_replicates: usize,
}

impl BandResult {
    /// Critical value at another level from the same replicates.
    pub fn critical_value_at(&self, alpha: f64) -> f64 {
        ceiling_rank_quantile(&self.replicate_sup_stats, 1.0 - alpha)
    }
}

/// `n` rows drawn with replacement, each row's full record kept together.
pub fn resample(sample: &CensoredSample, rng: &mut StreamRng) -> CensoredSample {
    let obs = sample.observations();
    let n = obs.len();
    let rows = (0..n).map(|_| obs[rng.random_range(0..n)].clone()).collect();
    sample
        .from_rows_of(rows)
        .expect("resampled rows share the parent schema")
}

/// Smallest order statistic whose rank is at least `ceil(level * m)`.
fn ceiling_rank_quantile(values: &[f64], level: f64) -> f64 {
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let m = sorted.len();
    // guard against level * m landing just above an integer in floating point
    let rank = ((level * m as f64) - 1e-9).ceil().max(1.0) as usize;
    sorted[rank.min(m) - 1]
}

/// Uniform band for `estimator` over its own grid. The estimator must be a
/// pure function of the sample and return the same grid on every call.
pub fn uniform_band<F>(sample: &CensoredSample, estimator: F, spec: &BootstrapSpec) -> Result<BandResult>
where
    F: Fn(&CensoredSample) -> Result<EffectCurve> + Sync + Send,
{
    spec.validate()?;
    let original = estimator(sample)?;
    let root_n = (sample.len() as f64).sqrt();
    let stats: Vec<Result<f64>> = spec.execution.map_indexed(spec.replicates, |b| {
        let mut rng = child_stream(spec.seed, &[b as u64]);
        let replicate = estimator(&resample(sample, &mut rng))?;
        if replicate.grid != original.grid {
            return Err(Error::InvalidArgument(
                "replicate estimate returned a different grid".into(),
            ));
        }
        let sup = replicate
            .estimates
            .iter()
            .zip(&original.estimates)
            .map(|(r, o)| (r - o).abs())
            .fold(0.0, f64::max);
        Ok(root_n * sup)
    });
    let mut replicate_sup_stats = Vec::with_capacity(stats.len());
    let mut failed = 0;
    for (b, s) in stats.into_iter().enumerate() {
        match s {
            Ok(v) => replicate_sup_stats.push(v),
            Err(e) => {
                log::debug!("bootstrap replicate {b} failed: {e}");
                failed += 1;
            }
        }
    }
    if failed as f64 > MAX_FAILED_SHARE * spec.replicates as f64 || replicate_sup_stats.is_empty() {
        return Err(Error::BootstrapUnstable {
            failed,
            total: spec.replicates,
        });
    }
    if failed > 0 {
        log::warn!("{failed} of {} bootstrap replicates failed and were dropped", spec.replicates);
    }
    let critical_value = ceiling_rank_quantile(&replicate_sup_stats, 1.0 - spec.alpha);
    Ok(BandResult {
        alpha: spec.alpha,
        critical_value,
        band_halfwidth: critical_value / root_n,
        replicate_sup_stats,
        failed_replicates: failed,
    })
}
