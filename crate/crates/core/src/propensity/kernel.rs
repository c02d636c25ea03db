//! Leave-one-out Nadaraya-Watson propensity estimator with product kernels.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Second-order univariate kernels, combined as products across covariates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Kernel {
    #[default]
    Epanechnikov,
    Uniform,
    Gaussian,
}

impl Kernel {
    pub fn eval(self, u: f64) -> f64 {
        match self {
            Kernel::Epanechnikov => {
                if u.abs() <= 1.0 {
                    0.75 * (1.0 - u * u)
                } else {
                    0.0
                }
            }
            Kernel::Uniform => {
                if u.abs() <= 1.0 {
                    0.5
                } else {
                    0.0
                }
            }
            Kernel::Gaussian => (-0.5 * u * u).exp() / (2.0 * std::f64::consts::PI).sqrt(),
        }
    }

    pub fn product(self, a: &[f64], b: &[f64], bandwidth: f64) -> f64 {
        a.iter()
            .zip(b)
            .map(|(&ai, &bi)| self.eval((bi - ai) / bandwidth))
            .product()
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s.to_ascii_lowercase().as_str() {
            "epanechnikov" => Some(Kernel::Epanechnikov),
            "uniform" => Some(Kernel::Uniform),
            "gaussian" => Some(Kernel::Gaussian),
            _ => None,
        }
    }
}

/// Leave-one-out fitted values at the training points:
/// `sum_{j != i} d_j K / sum_{j != i} K`.
pub(crate) fn leave_one_out(
    x: &[Vec<f64>],
    d: &[bool],
    bandwidth: f64,
    kernel: Kernel,
) -> Result<Vec<f64>> {
    let n = x.len();
    (0..n)
        .map(|i| {
            let (mut num, mut den) = (0.0, 0.0);
            for j in (0..n).filter(|&j| j != i) {
                let k = kernel.product(&x[i], &x[j], bandwidth);
                den += k;
                if d[j] {
                    num += k;
                }
            }
            if den > 0.0 {
                Ok(num / den)
            } else {
                Err(Error::BandwidthTooSmall(i))
            }
        })
        .collect()
}

/// Full-sample Nadaraya-Watson ratio at a new point; `None` when no training
/// point falls inside the kernel window.
pub(crate) fn at_point(
    train_x: &[Vec<f64>],
    train_d: &[bool],
    point: &[f64],
    bandwidth: f64,
    kernel: Kernel,
) -> Option<f64> {
    let (mut num, mut den) = (0.0, 0.0);
    for (xj, &dj) in train_x.iter().zip(train_d) {
        let k = kernel.product(point, xj, bandwidth);
        den += k;
        if dj {
            num += k;
        }
    }
    (den > 0.0).then(|| num / den)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kernels_integrate_to_one() {
        for k in [Kernel::Epanechnikov, Kernel::Uniform, Kernel::Gaussian] {
            let h = 1e-4;
            let s: f64 = (-80_000..=80_000).map(|i| k.eval(i as f64 * h) * h).sum();
            assert!((s - 1.0).abs() < 1e-4, "{k:?} integrates to {s}");
        }
    }

    #[test]
    fn flat_limit_is_mean_excluding_self() {
        let x: Vec<Vec<f64>> = (0..10).map(|i| vec![i as f64]).collect();
        let d: Vec<bool> = (0..10).map(|i| i != 3).collect();
        let p = leave_one_out(&x, &d, 1e9, Kernel::Epanechnikov).unwrap();
        assert!((p[3] - 1.0).abs() < 1e-12);
        assert!((p[0] - 8.0 / 9.0).abs() < 1e-12);
    }

    #[test]
    fn tiny_bandwidth_errors() {
        let x: Vec<Vec<f64>> = (0..5).map(|i| vec![i as f64 * 0.37]).collect();
        let d = vec![true, false, true, false, true];
        assert!(matches!(
            leave_one_out(&x, &d, 1e-12, Kernel::Epanechnikov),
            Err(Error::BandwidthTooSmall(0))
        ));
    }
}
