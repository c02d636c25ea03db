//! Maximum-likelihood logistic regression by iteratively reweighted least
//! squares (Newton-Raphson with step halving).

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

pub(crate) const MAX_ITER: usize = 100;
pub(crate) const SCORE_TOL: f64 = 1e-8;
pub(crate) const SEPARATION_NORM: f64 = 1e4;

#[derive(Debug, Clone, PartialEq)]
pub(crate) struct LogitSolution {
    pub coefficients: Vec<f64>,
    /// Log-likelihood at the start and after every accepted step.
    pub loglik_trace: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
}

pub(crate) fn sigmoid(eta: f64) -> f64 {
    if eta >= 0.0 {
        1.0 / (1.0 + (-eta).exp())
    } else {
        let e = eta.exp();
        e / (1.0 + e)
    }
}

/// `ln(1 + e^eta)` without overflow.
fn softplus(eta: f64) -> f64 {
    if eta > 0.0 {
        eta + (-eta).exp().ln_1p()
    } else {
        eta.exp().ln_1p()
    }
}

fn log_likelihood(design: &DMatrix<f64>, d: &[bool], beta: &DVector<f64>) -> f64 {
    let eta = design * beta;
    eta.iter()
        .zip(d)
        .map(|(&e, &di)| if di { e - softplus(e) } else { -softplus(e) })
        .sum()
}

/// Fits `P(d = 1 | row) = sigmoid(row . beta)` for an `n x p` design that
/// already contains any intercept column.
pub(crate) fn irls(design: &DMatrix<f64>, d: &[bool]) -> Result<LogitSolution> {
    let (n, p) = design.shape();
    if n != d.len() {
        return Err(Error::DimensionMismatch {
            expected: n,
            actual: d.len(),
        });
    }
    let ones = d.iter().filter(|v| **v).count();
    if ones == 0 || ones == n {
        return Err(Error::InvalidArgument(
            "binary response has no variation".into(),
        ));
    }
    let y = DVector::from_iterator(n, d.iter().map(|&v| f64::from(u8::from(v))));
    let mut beta = DVector::zeros(p);
    let mut ll = log_likelihood(design, d, &beta);
    let mut trace = vec![ll];
    let mut converged = false;
    let mut iterations = 0;

    while iterations < MAX_ITER {
        let eta = design * &beta;
        let prob = eta.map(sigmoid);
        let score = design.tr_mul(&(&y - &prob));
        if score.amax() < SCORE_TOL {
            converged = true;
            break;
        }
        let w = prob.map(|pi| pi * (1.0 - pi));
        let mut weighted = design.clone();
        for (mut row, wi) in weighted.row_iter_mut().zip(w.iter()) {
            row *= *wi;
        }
        let hessian = design.tr_mul(&weighted);
        let Some(chol) = hessian.cholesky() else {
            return Err(if near_perfect_fit(ll, n) || beta.norm() > SEPARATION_NORM {
                Error::Separation
            } else {
                Error::SingularDesign
            });
        };
        let step = chol.solve(&score);

        let mut scale = 1.0;
        let mut accepted = None;
        for _ in 0..40 {
            let cand = &beta + &step * scale;
            let cand_ll = log_likelihood(design, d, &cand);
            if cand_ll.is_finite() && cand_ll >= ll {
                accepted = Some((cand, cand_ll));
                break;
            }
            scale *= 0.5;
        }
        iterations += 1;
        let Some((next, next_ll)) = accepted else {
            // no ascent direction left at floating-point resolution
            converged = score.amax() < SCORE_TOL.sqrt();
            break;
        };
        let gain = next_ll - ll;
        beta = next;
        ll = next_ll;
        trace.push(ll);
        if beta.norm() > SEPARATION_NORM {
            return Err(Error::Separation);
        }
        if gain <= f64::EPSILON * ll.abs() && step.amax() * scale < 1e-12 {
            converged = true;
            break;
        }
    }
    if near_perfect_fit(ll, n) {
        return Err(Error::Separation);
    }
    if !converged {
        log::warn!("logit IRLS stopped after {iterations} iterations without meeting the score tolerance");
    }
    Ok(LogitSolution {
        coefficients: beta.iter().copied().collect(),
        loglik_trace: trace,
        iterations,
        converged,
    })
}

fn near_perfect_fit(ll: f64, n: usize) -> bool {
    ll / n as f64 > -1e-6
}
