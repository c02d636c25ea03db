//! Censoring-rate calibration for exponential censoring times.
//!
//! For `Y ~ N(mu, s^2)` and `C ~ Exp(a)` independent,
//! `P(C < Y) = Phi(mu/s) - exp(-a mu + a^2 s^2 / 2) Phi((mu - a s^2)/s)`.
//! The design's covariate is integrated out by Gauss-Hermite quadrature.

use std::f64::consts::{PI, SQRT_2};

use nalgebra::{DMatrix, SymmetricEigen};
use statrs::function::erf::erfc;

use crate::error::{Error, Result};

use super::design::Dgp;

pub const QUADRATURE_POINTS: usize = 64;
pub const CALIBRATION_TOL: f64 = 1e-4;

/// Nodes and weights for `E[f(X)]`, `X ~ N(0, 1)`, via the Golub-Welsch
/// eigenproblem of the probabilists' Hermite recurrence. Weights sum to one.
pub fn gauss_hermite(points: usize) -> (Vec<f64>, Vec<f64>) {
    let jacobi = DMatrix::from_fn(points, points, |i, j| {
        if i + 1 == j || j + 1 == i {
            (i.max(j) as f64).sqrt()
        } else {
            0.0
        }
    });
    let eig = SymmetricEigen::new(jacobi);
    let mut pairs: Vec<(f64, f64)> = eig
        .eigenvalues
        .iter()
        .enumerate()
        .map(|(k, &x)| (x, eig.eigenvectors[(0, k)].powi(2)))
        .collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    pairs.into_iter().unzip()
}

/// Below this `erfc` underflows and the Mills-ratio expansion takes over.
const TAIL_SWITCH: f64 = -30.0;

/// `ln Phi(z) + z^2 / 2` for `z <= TAIL_SWITCH`, from the asymptotic
/// Mills-ratio expansion.
fn ln_scaled_lower_tail(z: f64) -> f64 {
    let z2 = z * z;
    -(-z).ln() - 0.5 * (2.0 * PI).ln() + (1.0 - 1.0 / z2 + 3.0 / (z2 * z2)).ln()
}

#[cfg(test)]
fn ln_norm_cdf(z: f64) -> f64 {
    if z > TAIL_SWITCH {
        norm_cdf(z).ln()
    } else {
        ln_scaled_lower_tail(z) - 0.5 * z * z
    }
}

fn norm_cdf(z: f64) -> f64 {
    0.5 * erfc(-z / SQRT_2)
}

/// `P(C < Y)` for `Y ~ N(mu, sd^2)`, `C ~ Exp(rate)`.
pub fn normal_exponential_censoring(mu: f64, sd: f64, rate: f64) -> f64 {
    if rate <= 0.0 {
        return 0.0;
    }
    let z = (mu - rate * sd * sd) / sd;
    // exp(-a mu + a^2 s^2 / 2) Phi(z); in the far tail the quadratic terms
    // cancel exactly against z^2 / 2, leaving exp(-mu^2 / (2 s^2))
    let tail = if z > TAIL_SWITCH {
        (-rate * mu + 0.5 * rate * rate * sd * sd + norm_cdf(z).ln()).exp()
    } else {
        (-0.5 * (mu / sd).powi(2) + ln_scaled_lower_tail(z)).exp()
    };
    (norm_cdf(mu / sd) - tail).max(0.0)
}

/// Expected censoring share of a design at exponential rate `rate`.
pub fn censoring_probability(dgp: Dgp, rate: f64) -> f64 {
    let (nodes, weights) = gauss_hermite(QUADRATURE_POINTS);
    censoring_probability_with(dgp, rate, &nodes, &weights)
}

fn censoring_probability_with(dgp: Dgp, rate: f64, nodes: &[f64], weights: &[f64]) -> f64 {
    nodes
        .iter()
        .zip(weights)
        .map(|(&x, &w)| {
            let p = dgp.treatment_probability(x);
            let [(m0, s0), (m1, s1)] = dgp.conditional_outcomes(x);
            w * (p * normal_exponential_censoring(m1, s1, rate)
                + (1.0 - p) * normal_exponential_censoring(m0, s0, rate))
        })
        .sum()
}

/// Rate `a` at which the expected censoring share equals `target`, by
/// bisection to [`CALIBRATION_TOL`].
///
/// Censoring times are nonnegative, so outcomes below zero are never
/// censored and the share is bounded by `P(Y > 0)`; targets at or above that
/// bound are unattainable.
pub fn calibrate_censoring(dgp: Dgp, target: f64) -> Result<f64> {
    if !(target > 0.0 && target < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "censoring target must lie in (0, 1), got {target}"
        )));
    }
    let (nodes, weights) = gauss_hermite(QUADRATURE_POINTS);
    let prob = |a: f64| censoring_probability_with(dgp, a, &nodes, &weights);
    let mut lo = 0.0;
    let mut hi = 1.0;
    while prob(hi) < target {
        lo = hi;
        hi *= 2.0;
        if hi > 1e8 {
            return Err(Error::InvalidArgument(format!(
                "censoring target {target} unattainable: share is bounded by {:.4}",
                prob(hi)
            )));
        }
    }
    loop {
        let mid = 0.5 * (lo + hi);
        let p = prob(mid);
        if (p - target).abs() < CALIBRATION_TOL || hi - lo < 1e-12 * hi {
            return Ok(mid);
        }
        if p < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
}
