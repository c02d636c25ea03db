mod common;

use kmte::propensity::{fit_nw_kernel, fit_parametric_logit, fit_series_logit, Kernel, SeriesOrder, DEFAULT_TRIM};
use kmte::rng::child_stream;
use kmte::simulation::{generate, DesignSpec, Dgp};
use kmte::Execution;
use rand::Rng;
use rand_distr::StandardNormal;

use common::{logistic, mean_and_se};

#[test]
fn logit_recovers_design_slope_and_midpoint() {
    let design = DesignSpec::new(Dgp::Two, 10_000, 0.0).unwrap();
    let fits = Execution::Parallel.map_indexed(100, |r| {
        let s = generate(&design, &mut child_stream(31, &[r as u64]));
        let fit = fit_parametric_logit(&s.covariates(), &s.treatments(), DEFAULT_TRIM).unwrap();
        assert!(fit.loglik_trace().windows(2).all(|w| w[1] >= w[0]));
        (fit.coefficients()[1], fit.predict(&[0.0]).unwrap())
    });
    let slopes: Vec<f64> = fits.iter().map(|f| f.0).collect();
    let mids: Vec<f64> = fits.iter().map(|f| f.1).collect();
    let (slope, se) = mean_and_se(&slopes);
    assert!((slope - 0.5).abs() <= 3.0 * se, "slope {slope} se {se}");
    let (mid, se) = mean_and_se(&mids);
    assert!((mid - 0.5).abs() <= 3.0 * se, "p(0) {mid} se {se}");
}

fn quadratic_design(seed: u64, rep: u64, n: usize) -> (Vec<Vec<f64>>, Vec<bool>, Vec<f64>) {
    let mut rng = child_stream(seed, &[rep]);
    let mut x = Vec::with_capacity(n);
    let mut d = Vec::with_capacity(n);
    let mut p = Vec::with_capacity(n);
    for _ in 0..n {
        let v: f64 = rng.sample(StandardNormal);
        let pi = logistic(0.3 + 0.5 * v - 0.2 * v * v);
        x.push(vec![v]);
        d.push(rng.random::<f64>() < pi);
        p.push(pi);
    }
    (x, d, p)
}

#[test]
fn richer_series_predicts_curved_propensity_better() {
    let mut mse = [0.0; 2];
    for rep in 0..20 {
        let (x, d, _) = quadratic_design(5, rep, 2000);
        let (hx, _, hp) = quadratic_design(6, rep, 2000);
        for (k, terms) in [2, 4].into_iter().enumerate() {
            let fit = fit_series_logit(&x, &d, SeriesOrder::Terms(terms), DEFAULT_TRIM).unwrap();
            mse[k] += hx
                .iter()
                .zip(&hp)
                .map(|(row, p)| (fit.predict(row).unwrap() - p).powi(2))
                .sum::<f64>()
                / hx.len() as f64;
        }
    }
    assert!(mse[1] < mse[0], "L=2 mse {} vs L=4 mse {}", mse[0] / 20.0, mse[1] / 20.0);
}

#[test]
fn kernel_predictions_concentrate_on_the_mean_when_uninformative() {
    let mut rng = child_stream(9, &[]);
    let n = 4000;
    let x: Vec<Vec<f64>> = (0..n).map(|_| vec![rng.sample(StandardNormal)]).collect();
    let d: Vec<bool> = (0..n).map(|_| rng.random::<f64>() < 0.3).collect();
    let fit = fit_nw_kernel(&x, &d, 0.5, Kernel::Gaussian, DEFAULT_TRIM).unwrap();
    let mean_d = d.iter().filter(|v| **v).count() as f64 / n as f64;
    let (centre, se) = mean_and_se(fit.fitted());
    assert!((centre - mean_d).abs() <= 3.0 * se.max(1e-3), "centre {centre} vs {mean_d}");
    let central: Vec<f64> = [-0.5, 0.0, 0.5].iter().map(|&v| fit.predict(&[v]).unwrap()).collect();
    assert!(central.iter().all(|p| (p - 0.3).abs() < 0.05), "{central:?}");
}
