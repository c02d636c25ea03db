//! The four unconfounded Monte Carlo designs.
//!
//! `X, e0, e1 ~ N(0, 1)` independent, `P(T = 1 | X) = logistic(0.5 X)`,
//! censoring `C ~ Exp(a)` independent of everything else:
//!
//! | design | `Y0`       | `Y1`                  |
//! |--------|------------|-----------------------|
//! | 1      | `e0`       | `Y0 + 1`              |
//! | 2      | `e0`       | `Y0 + 1 + e1`         |
//! | 3      | `X + e0`   | `Y0 + 1 + X`          |
//! | 4      | `X + e0`   | `Y0 + 1 + X + e1`     |
//!
//! In every design `E[Y1] = median(Y1) = 1` and `E[Y0] = median(Y0) = 0`.

use rand::Rng;
use rand_distr::{Exp, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::data::{CensoredSample, Observation};
use crate::error::{Error, Result};
use crate::rng::StreamRng;

use super::calibrate::calibrate_censoring;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub enum Dgp {
    One,
    Two,
    Three,
    Four,
}

impl TryFrom<u8> for Dgp {
    type Error = Error;

    fn try_from(id: u8) -> Result<Self> {
        match id {
            1 => Ok(Dgp::One),
            2 => Ok(Dgp::Two),
            3 => Ok(Dgp::Three),
            4 => Ok(Dgp::Four),
            _ => Err(Error::InvalidArgument(format!("design id must be 1-4, got {id}"))),
        }
    }
}

impl From<Dgp> for u8 {
    fn from(d: Dgp) -> u8 {
        d.id()
    }
}

impl Dgp {
    pub const ALL: [Dgp; 4] = [Dgp::One, Dgp::Two, Dgp::Three, Dgp::Four];

    pub fn id(self) -> u8 {
        match self {
            Dgp::One => 1,
            Dgp::Two => 2,
            Dgp::Three => 3,
            Dgp::Four => 4,
        }
    }

    pub fn treatment_probability(self, x: f64) -> f64 {
        1.0 / (1.0 + (-0.5 * x).exp())
    }

    /// Conditional law of `(Y0, Y1)` given `X = x` as `[(mean, sd); 2]`.
    pub fn conditional_outcomes(self, x: f64) -> [(f64, f64); 2] {
        let s2 = std::f64::consts::SQRT_2;
        match self {
            Dgp::One => [(0.0, 1.0), (1.0, 1.0)],
            Dgp::Two => [(0.0, 1.0), (1.0, s2)],
            Dgp::Three => [(x, 1.0), (1.0 + 2.0 * x, 1.0)],
            Dgp::Four => [(x, 1.0), (1.0 + 2.0 * x, s2)],
        }
    }

    /// Potential outcomes from one draw of the primitives.
    fn outcomes(self, x: f64, e0: f64, e1: f64) -> (f64, f64) {
        match self {
            Dgp::One => (e0, e0 + 1.0),
            Dgp::Two => (e0, e0 + 1.0 + e1),
            Dgp::Three => (x + e0, x + e0 + 1.0 + x),
            Dgp::Four => (x + e0, x + e0 + 1.0 + x + e1),
        }
    }
}

/// A design at a sample size and censoring level. The exponential rate is
/// calibrated on construction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DesignSpec {
    pub dgp: Dgp,
    pub n: usize,
    pub target_censoring: f64,
    /// Exponential rate of the censoring time; zero means no censoring.
    pub censoring_rate: f64,
}

impl DesignSpec {
    pub fn new(dgp: Dgp, n: usize, target_censoring: f64) -> Result<Self> {
        if n < 2 {
            return Err(Error::InvalidArgument(format!("sample size must be >= 2, got {n}")));
        }
        if !(0.0..1.0).contains(&target_censoring) {
            return Err(Error::InvalidArgument(format!(
                "censoring target must lie in [0, 1), got {target_censoring}"
            )));
        }
        let censoring_rate = if target_censoring == 0.0 {
            0.0
        } else {
            calibrate_censoring(dgp, target_censoring)?
        };
        Ok(Self {
            dgp,
            n,
            target_censoring,
            censoring_rate,
        })
    }
}

/// Draws `spec.n` observations `(Q, delta, X, T)`.
pub fn generate(spec: &DesignSpec, rng: &mut StreamRng) -> CensoredSample {
    let exp = (spec.censoring_rate > 0.0)
        .then(|| Exp::new(spec.censoring_rate).expect("calibrated rate is positive"));
    let rows = (0..spec.n)
        .map(|_| {
            let x: f64 = rng.sample(StandardNormal);
            let e0: f64 = rng.sample(StandardNormal);
            let e1: f64 = rng.sample(StandardNormal);
            let t = rng.random::<f64>() < spec.dgp.treatment_probability(x);
            let c = exp.map_or(f64::INFINITY, |e| rng.sample(e));
            let (y0, y1) = spec.dgp.outcomes(x, e0, e1);
            let y = if t { y1 } else { y0 };
            Observation::new(y.min(c), y <= c, vec![x], t)
        })
        .collect();
    CensoredSample::new(rows).expect("generated rows are finite")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::master_stream;

    #[test]
    fn no_censoring_target_gives_all_uncensored() {
        let spec = DesignSpec::new(Dgp::Four, 500, 0.0).unwrap();
        let s = generate(&spec, &mut master_stream(1));
        assert_eq!(s.censoring_fraction(), 0.0);
        assert_eq!(s.len(), 500);
    }

    #[test]
    fn treatment_share_is_half() {
        let spec = DesignSpec::new(Dgp::One, 40_000, 0.0).unwrap();
        let s = generate(&spec, &mut master_stream(2));
        let share = s.treatments().iter().filter(|t| **t).count() as f64 / s.len() as f64;
        let se = (0.25 / s.len() as f64).sqrt();
        assert!((share - 0.5).abs() < 3.0 * se, "share {share}");
    }

    #[test]
    fn realized_censoring_matches_calibration() {
        for (dgp, target) in [(Dgp::One, 0.10), (Dgp::Four, 0.30)] {
            let spec = DesignSpec::new(dgp, 100_000, target).unwrap();
            let s = generate(&spec, &mut master_stream(3));
            assert!((s.censoring_fraction() - target).abs() < 0.01);
        }
    }

    #[test]
    fn outcome_laws_match_conditional_moments() {
        for dgp in Dgp::ALL {
            let x = 0.8;
            let [(m0, s0), (m1, s1)] = dgp.conditional_outcomes(x);
            let mut rng = master_stream(dgp.id() as u64);
            let draws: Vec<(f64, f64)> = (0..20_000)
                .map(|_| dgp.outcomes(x, rng.sample(StandardNormal), rng.sample(StandardNormal)))
                .collect();
            let mean1 = draws.iter().map(|d| d.1).sum::<f64>() / 20_000.0;
            let var1 = draws.iter().map(|d| (d.1 - mean1).powi(2)).sum::<f64>() / 20_000.0;
            let mean0 = draws.iter().map(|d| d.0).sum::<f64>() / 20_000.0;
            assert!((mean1 - m1).abs() < 0.05 && (mean0 - m0).abs() < 0.05);
            assert!((var1.sqrt() - s1).abs() < 0.05 && s0 == 1.0);
        }
    }

    #[test]
    fn invalid_specs() {
        assert!(DesignSpec::new(Dgp::One, 1, 0.0).is_err());
        assert!(DesignSpec::new(Dgp::One, 10, 1.0).is_err());
        assert!(Dgp::try_from(5).is_err());
    }
}
