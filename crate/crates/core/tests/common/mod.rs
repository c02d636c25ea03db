//! Independent reference implementations and random sample generators shared
//! by the integration suites. Nothing here calls into the estimators under
//! test.

#![allow(dead_code)]

use kmte::{CensoredSample, Observation};
use rand::Rng;
use rand_distr::{Exp, StandardNormal};

// ---------------------------------------------------------------------------
// Kaplan-Meier through risk-set counting
// ---------------------------------------------------------------------------

/// Product-limit atoms `(y, mass)` recomputed from risk-set counts at each
/// distinct uncensored value.
pub fn product_limit_atoms(q: &[f64], delta: &[bool]) -> Vec<(f64, f64)> {
    let mut events: Vec<f64> = q.iter().zip(delta).filter(|(_, d)| **d).map(|(y, _)| *y).collect();
    events.sort_by(f64::total_cmp);
    events.dedup();
    let mut survival = 1.0;
    let mut atoms = Vec::with_capacity(events.len());
    for y in events {
        let at_risk = q.iter().filter(|&&v| v >= y).count() as f64;
        let d = q.iter().zip(delta).filter(|(v, dd)| **v == y && **dd).count() as f64;
        let next = survival * (1.0 - d / at_risk);
        atoms.push((y, survival - next));
        survival = next;
    }
    atoms
}

pub fn step_cdf(atoms: &[(f64, f64)], y: f64) -> f64 {
    atoms.iter().filter(|(p, _)| *p <= y).map(|(_, m)| m).sum()
}

// ---------------------------------------------------------------------------
// Uncensored sample analogues
// ---------------------------------------------------------------------------

/// Horvitz-Thompson pieces for arm `t`: `(y_i, 1 / (n p_i))` or
/// `(y_i, 1 / (n (1 - p_i)))`.
fn ipw_atoms(y: &[f64], t: &[bool], p: &[f64], arm: bool) -> Vec<(f64, f64)> {
    let n = y.len() as f64;
    let mut atoms: Vec<(f64, f64)> = (0..y.len())
        .filter(|&i| t[i] == arm)
        .map(|i| (y[i], if arm { 1.0 / (n * p[i]) } else { 1.0 / (n * (1.0 - p[i])) }))
        .collect();
    atoms.sort_by(|a, b| a.0.total_cmp(&b.0));
    atoms
}

pub fn ipw_mean(y: &[f64], t: &[bool], p: &[f64], arm: bool) -> f64 {
    ipw_atoms(y, t, p, arm).iter().map(|(v, w)| v * w).sum()
}

pub fn ipw_cdf(y: &[f64], t: &[bool], p: &[f64], arm: bool, at: f64) -> f64 {
    step_cdf(&ipw_atoms(y, t, p, arm), at)
}

pub fn ipw_mass(y: &[f64], t: &[bool], p: &[f64], arm: bool) -> f64 {
    ipw_atoms(y, t, p, arm).iter().map(|(_, w)| w).sum()
}

/// Smallest observed `y` whose cumulative weight reaches `tau`.
pub fn ipw_quantile(y: &[f64], t: &[bool], p: &[f64], arm: bool, tau: f64) -> f64 {
    let atoms = ipw_atoms(y, t, p, arm);
    let mut acc = 0.0;
    for (i, &(v, w)) in atoms.iter().enumerate() {
        acc += w;
        let last_at_v = atoms.get(i + 1).is_none_or(|a| a.0 != v);
        if last_at_v && acc >= tau {
            return v;
        }
    }
    panic!("tau {tau} beyond mass {acc}");
}

/// Instrument-weighted complier moments: `omega_i = z/e - (1-z)/(1-e)`.
pub struct Complier {
    /// `(y, omega / n)` for arm `t`, sorted by `y`.
    atoms: Vec<(f64, f64)>,
    pub kappa: f64,
}

impl Complier {
    pub fn new(y: &[f64], t: &[bool], z: &[bool], e: &[f64], arm: bool) -> Self {
        let n = y.len() as f64;
        let mut atoms: Vec<(f64, f64)> = (0..y.len())
            .filter(|&i| t[i] == arm)
            .map(|i| {
                let omega = if z[i] { 1.0 / e[i] } else { -1.0 / (1.0 - e[i]) };
                (y[i], omega / n)
            })
            .collect();
        atoms.sort_by(|a, b| a.0.total_cmp(&b.0));
        let kappa = atoms.iter().map(|(_, w)| w).sum();
        Self { atoms, kappa }
    }

    pub fn mean(&self) -> f64 {
        self.atoms.iter().map(|(v, w)| v * w).sum::<f64>() / self.kappa
    }

    pub fn cdf(&self, at: f64) -> f64 {
        step_cdf(&self.atoms, at) / self.kappa
    }

    /// Quantile of the sorted and clipped CDF levels at the distinct values.
    pub fn quantile(&self, tau: f64) -> f64 {
        let mut points: Vec<f64> = self.atoms.iter().map(|a| a.0).collect();
        points.dedup();
        let mut levels: Vec<f64> = points.iter().map(|&v| self.cdf(v).clamp(0.0, 1.0)).collect();
        levels.sort_by(f64::total_cmp);
        let k = levels.iter().position(|&l| l >= tau).expect("tau within complier mass");
        points[k]
    }

    pub fn max_level(&self) -> f64 {
        let mut points: Vec<f64> = self.atoms.iter().map(|a| a.0).collect();
        points.dedup();
        points.iter().map(|&v| self.cdf(v).clamp(0.0, 1.0)).fold(0.0, f64::max)
    }
}

/// Empirical changes-in-changes in integer arithmetic. Each cell is a sorted
/// vector of outcomes.
pub struct Cic {
    pub cells: [[Vec<f64>; 2]; 2],
}

fn count_le(a: &[f64], y: f64) -> usize {
    a.iter().filter(|&&v| v <= y).count()
}

/// `a^{-1}(k / from)` on the sorted sample `a`: element of rank
/// `ceil(k len(a) / from)`, with level zero mapping to the minimum.
fn inverse_rank(a: &[f64], k: usize, from: usize) -> f64 {
    let m = (k * a.len()).div_ceil(from);
    a[m.max(1) - 1]
}

impl Cic {
    pub fn new(mut cells: [[Vec<f64>; 2]; 2]) -> Self {
        for c in cells.iter_mut().flatten() {
            c.sort_by(f64::total_cmp);
        }
        Self { cells }
    }

    fn c(&self, g: usize, p: usize) -> &[f64] {
        &self.cells[g][p]
    }

    /// `F_01^{-1}(F_00(y))`.
    fn transform(&self, y: f64) -> f64 {
        inverse_rank(self.c(0, 1), count_le(self.c(0, 0), y), self.c(0, 0).len())
    }

    pub fn att(&self) -> f64 {
        let t = self.c(1, 1);
        let u = self.c(1, 0);
        t.iter().sum::<f64>() / t.len() as f64
            - u.iter().map(|&y| self.transform(y)).sum::<f64>() / u.len() as f64
    }

    pub fn counterfactual(&self, y: f64) -> f64 {
        let k = count_le(self.c(0, 1), y);
        if k == 0 {
            return 0.0;
        }
        let v = inverse_rank(self.c(0, 0), k, self.c(0, 1).len());
        count_le(self.c(1, 0), v) as f64 / self.c(1, 0).len() as f64
    }

    /// Mass of the counterfactual distribution, below one when the `(1, 0)`
    /// cell reaches beyond the `(0, 0)` support.
    pub fn counterfactual_mass(&self) -> f64 {
        self.counterfactual(*self.c(0, 1).last().unwrap())
    }

    pub fn dtt(&self, y: f64) -> f64 {
        count_le(self.c(1, 1), y) as f64 / self.c(1, 1).len() as f64 - self.counterfactual(y)
    }

    pub fn qtt(&self, tau: f64) -> f64 {
        let t = self.c(1, 1);
        let treated = t[((tau * t.len() as f64).ceil() as usize).max(1) - 1];
        let mut points = self.c(0, 1).to_vec();
        points.dedup();
        let cf = points
            .iter()
            .copied()
            .find(|&y| self.counterfactual(y) >= tau)
            .expect("tau within counterfactual mass");
        treated - cf
    }
}

// ---------------------------------------------------------------------------
// Random samples
// ---------------------------------------------------------------------------

/// Outcome draw, rounded to one decimal when `ties` so repeats are common.
fn outcome(rng: &mut impl Rng, mean: f64, ties: bool) -> f64 {
    let y = mean + rng.sample::<f64, _>(StandardNormal);
    if ties { (y * 10.0).round() / 10.0 } else { y }
}

/// A single group (all treated) of `n` rows where each row is censored with
/// probability `censoring`. Censored rows sometimes share an uncensored value.
pub fn random_group(rng: &mut impl Rng, n: usize, censoring: f64, ties: bool) -> CensoredSample {
    let rows = (0..n)
        .map(|_| {
            let y = outcome(rng, 0.0, ties);
            let censored = rng.random::<f64>() < censoring;
            let q = if censored && rng.random::<f64>() < 0.7 {
                outcome(rng, -0.5, ties).min(y)
            } else {
                y
            };
            Observation::new(q, !censored, vec![], true)
        })
        .collect();
    CensoredSample::new(rows).unwrap()
}

pub fn logistic(v: f64) -> f64 {
    1.0 / (1.0 + (-v).exp())
}

/// One covariate, `P(T = 1 | X) = logistic(0.5 X)`, `Y = X + T + e` with
/// optional exponential censoring.
pub fn random_unconfounded(rng: &mut impl Rng, n: usize, censoring_rate: Option<f64>, ties: bool) -> CensoredSample {
    loop {
        let rows: Vec<Observation> = (0..n)
            .map(|_| {
                let x: f64 = rng.sample(StandardNormal);
                let t = rng.random::<f64>() < logistic(0.5 * x);
                let y = outcome(rng, x + f64::from(u8::from(t)), ties);
                let (q, d) = censor(rng, y, censoring_rate);
                Observation::new(q, d, vec![x], t)
            })
            .collect();
        let treated = rows.iter().filter(|o| o.t).count();
        if treated >= 3 && n - treated >= 3 {
            return CensoredSample::new(rows).unwrap();
        }
    }
}

fn censor(rng: &mut impl Rng, y: f64, rate: Option<f64>) -> (f64, bool) {
    match rate {
        Some(a) => {
            let c: f64 = rng.sample(Exp::new(a).unwrap());
            (y.min(c), y <= c)
        }
        None => (y, true),
    }
}

/// Binary instrument with `P(Z = 1 | X) = logistic(0.5 X)`. Compliers take
/// `T = Z`; with probability `1 - compliance` a unit is an always- or
/// never-taker. Outcome `Y = X + effect T + e`.
pub fn random_late(
    rng: &mut impl Rng,
    n: usize,
    compliance: f64,
    effect: f64,
    censoring_rate: Option<f64>,
    ties: bool,
) -> CensoredSample {
    loop {
        let rows: Vec<Observation> = (0..n)
            .map(|_| {
                let x: f64 = rng.sample(StandardNormal);
                let z = rng.random::<f64>() < logistic(0.5 * x);
                let t = if rng.random::<f64>() < compliance { z } else { rng.random::<bool>() };
                let y = outcome(rng, x + effect * f64::from(u8::from(t)), ties);
                let (q, d) = censor(rng, y, censoring_rate);
                Observation::new(q, d, vec![x], t).with_instrument(z)
            })
            .collect();
        let mut cells = [[0usize; 2]; 2];
        for o in &rows {
            cells[usize::from(o.t)][usize::from(o.z.unwrap())] += 1;
        }
        if cells.iter().flatten().all(|&c| c >= 2) || (compliance == 1.0 && cells[0][0] >= 2 && cells[1][1] >= 2) {
            return CensoredSample::new(rows).unwrap();
        }
    }
}

/// Four group-period cells of `per_cell` rows each with
/// `Y = 0.5 g + trend p + effect g p + e`.
pub fn random_cic(
    rng: &mut impl Rng,
    per_cell: usize,
    trend: f64,
    effect: f64,
    censoring_rate: Option<f64>,
    ties: bool,
) -> CensoredSample {
    let mut rows = Vec::with_capacity(4 * per_cell);
    for g in [false, true] {
        for p in [false, true] {
            let (gf, pf) = (f64::from(u8::from(g)), f64::from(u8::from(p)));
            for _ in 0..per_cell {
                let y = outcome(rng, 0.5 * gf + trend * pf + effect * gf * pf, ties);
                let (q, d) = censor(rng, y, censoring_rate);
                rows.push(Observation::new(q, d, vec![], g && p).with_cell(g, p));
            }
        }
    }
    CensoredSample::new(rows).unwrap()
}

/// Column views of a sample.
pub fn columns(s: &CensoredSample) -> (Vec<f64>, Vec<bool>, Vec<bool>) {
    let o = s.observations();
    (
        o.iter().map(|r| r.q).collect(),
        o.iter().map(|r| r.delta).collect(),
        o.iter().map(|r| r.t).collect(),
    )
}

/// Outcomes of cell `(g, p)`.
pub fn cell_values(s: &CensoredSample, g: bool, p: bool) -> Vec<f64> {
    s.observations()
        .iter()
        .filter(|o| o.g == Some(g) && o.period == Some(p))
        .map(|o| o.q)
        .collect()
}

pub fn mean_and_se(v: &[f64]) -> (f64, f64) {
    let m = v.len() as f64;
    let mean = v.iter().sum::<f64>() / m;
    let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (m - 1.0);
    (mean, (var / m).sqrt())
}

/// Standard normal CDF.
pub fn phi(z: f64) -> f64 {
    0.5 * statrs::function::erf::erfc(-z / std::f64::consts::SQRT_2)
}
