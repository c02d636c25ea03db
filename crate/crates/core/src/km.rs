//! Kaplan-Meier machinery within one estimation group.
//!
//! Observations are ordered by `q` with their concomitants (`delta`, `x`).
//! At tied `q`, uncensored observations precede censored ones, then original
//! row order breaks any remaining ties.
//!
//! Two independent routes produce the product-limit distribution:
//! [`km_cdf`] uses the closed-form per-observation weights, while
//! [`km_cdf_via_hazard`] product-integrates the cumulative hazard of the
//! censored-data risk sets. They must agree to [`EPS_NUM`](crate::EPS_NUM).

use serde::Serialize;

use crate::data::{CensoredSample, Observation};
use crate::dist::StepDistribution;
use crate::error::{Error, Result};

/// One group's observations in ascending `q` order with their concomitants.
#[derive(Debug, Clone, PartialEq)]
pub struct OrderedGroup {
    sorted_q: Vec<f64>,
    delta: Vec<bool>,
    x: Vec<Vec<f64>>,
    original_index: Vec<usize>,
    parent_size: usize,
}

impl OrderedGroup {
    pub fn sorted_q(&self) -> &[f64] {
        &self.sorted_q
    }

    pub fn concomitant_delta(&self) -> &[bool] {
        &self.delta
    }

    pub fn concomitant_x(&self) -> &[Vec<f64>] {
        &self.x
    }

    /// Position of each ordered observation in the parent sample.
    pub fn original_index(&self) -> &[usize] {
        &self.original_index
    }

    pub fn size(&self) -> usize {
        self.sorted_q.len()
    }

    pub fn parent_size(&self) -> usize {
        self.parent_size
    }

    pub fn uncensored_count(&self) -> usize {
        self.delta.iter().filter(|d| **d).count()
    }

    pub fn max_q(&self) -> f64 {
        *self.sorted_q.last().expect("groups are non-empty")
    }

    /// Whether the largest observation is censored (the product-limit
    /// distribution is then defective).
    pub fn max_is_censored(&self) -> bool {
        !*self.delta.last().expect("groups are non-empty")
    }
}

/// Orders the observations matching `selector`.
pub fn order_group<F>(sample: &CensoredSample, selector: F) -> Result<OrderedGroup>
where
    F: Fn(&Observation) -> bool,
{
    let obs = sample.observations();
    let mut idx: Vec<usize> = (0..obs.len()).filter(|&i| selector(&obs[i])).collect();
    if idx.is_empty() {
        return Err(Error::EmptyGroup("selection matched no observations".into()));
    }
    idx.sort_by(|&a, &b| {
        obs[a]
            .q
            .total_cmp(&obs[b].q)
            .then(obs[b].delta.cmp(&obs[a].delta))
            .then(a.cmp(&b))
    });
    Ok(OrderedGroup {
        sorted_q: idx.iter().map(|&i| obs[i].q).collect(),
        delta: idx.iter().map(|&i| obs[i].delta).collect(),
        x: idx.iter().map(|&i| obs[i].x.clone()).collect(),
        original_index: idx,
        parent_size: obs.len(),
    })
}

/// Product-limit masses aligned to an [`OrderedGroup`].
#[derive(Debug, Clone, PartialEq)]
pub struct KaplanMeierWeights {
    /// Within-group jump sizes; sum to one when the maximum is uncensored.
    jumps: Vec<f64>,
    /// `n_t / n`.
    group_fraction: f64,
}

impl KaplanMeierWeights {
    /// Weights scaled by the group fraction, i.e. masses of the joint
    /// distribution over the parent sample.
    pub fn weights(&self) -> Vec<f64> {
        self.jumps.iter().map(|w| self.group_fraction * w).collect()
    }

    /// Unscaled within-group jump sizes.
    pub fn jumps(&self) -> &[f64] {
        &self.jumps
    }

    pub fn group_fraction(&self) -> f64 {
        self.group_fraction
    }

    pub fn weight(&self, i: usize) -> f64 {
        self.group_fraction * self.jumps[i]
    }

    /// Total within-group mass.
    pub fn within_mass(&self) -> f64 {
        self.jumps.iter().sum()
    }

    /// `sum_i W_i * phi(q_i, x_i)`, with `phi` evaluated only where `W_i > 0`.
    pub fn integrate<F>(&self, group: &OrderedGroup, phi: F) -> Result<f64>
    where
        F: Fn(f64, &[f64]) -> f64,
    {
        let mut acc = 0.0;
        for (i, &jump) in self.jumps.iter().enumerate() {
            if jump == 0.0 {
                continue;
            }
            let v = phi(group.sorted_q[i], &group.x[i]);
            if !v.is_finite() {
                return Err(Error::NonFiniteIntegrand(i));
            }
            acc += self.group_fraction * jump * v;
        }
        Ok(acc)
    }
}

/// Closed-form product-limit weights
/// `W_i = (n_t/n) * delta_i/(n_t-i+1) * prod_{j<i} ((n_t-j)/(n_t-j+1))^delta_j`,
/// computed in one pass with a running product. Every factor lies in
/// `[0, 1]`, so the product cannot overflow and does not underflow for any
/// realistic group size.
pub fn km_weights(group: &OrderedGroup) -> KaplanMeierWeights {
    let n = group.size();
    let mut jumps = Vec::with_capacity(n);
    let mut survival = 1.0;
    for (i, &d) in group.delta.iter().enumerate() {
        let at_risk = (n - i) as f64;
        if d {
            jumps.push(survival / at_risk);
            survival *= (at_risk - 1.0) / at_risk;
        } else {
            jumps.push(0.0);
        }
    }
    KaplanMeierWeights {
        jumps,
        group_fraction: n as f64 / group.parent_size as f64,
    }
}

/// Product-limit CDF of the group's latent outcome (total mass <= 1).
pub fn km_cdf(group: &OrderedGroup) -> Result<StepDistribution> {
    if group.uncensored_count() == 0 {
        return Err(Error::NoUncensored("group".into()));
    }
    let w = km_weights(group);
    StepDistribution::from_atoms(group.sorted_q.iter().copied().zip(w.jumps.iter().copied()))
}

/// Jumps of the cumulative hazard of the censored-data risk sets.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HazardStep {
    pub locations: Vec<f64>,
    pub increments: Vec<f64>,
}

/// Cumulative hazard with increment `d / r` at each distinct uncensored
/// value, where `d` counts events there and `r` observations still at risk.
/// Without ties this is `delta_i / (n_t - i + 1)` per order statistic.
pub fn cumulative_hazard(group: &OrderedGroup) -> HazardStep {
    let n = group.size();
    let mut locations = Vec::new();
    let mut increments = Vec::new();
    let mut i = 0;
    while i < n {
        let q = group.sorted_q[i];
        let at_risk = (n - i) as f64;
        let mut events = 0usize;
        let mut j = i;
        while j < n && group.sorted_q[j] == q {
            events += usize::from(group.delta[j]);
            j += 1;
        }
        if events > 0 {
            locations.push(q);
            increments.push(events as f64 / at_risk);
        }
        i = j;
    }
    HazardStep {
        locations,
        increments,
    }
}

/// Product-limit CDF through the product integral of the hazard:
/// `F(y) = sum_{s <= y} prod_{a < s} (1 - dL(a)) dL(s)`.
pub fn km_cdf_via_hazard(group: &OrderedGroup) -> Result<StepDistribution> {
    if group.uncensored_count() == 0 {
        return Err(Error::NoUncensored("group".into()));
    }
    let hazard = cumulative_hazard(group);
    let mut survival = 1.0;
    let mut atoms = Vec::with_capacity(hazard.locations.len());
    for (&y, &dl) in hazard.locations.iter().zip(&hazard.increments) {
        atoms.push((y, survival * dl));
        survival *= 1.0 - dl;
    }
    StepDistribution::from_atoms(atoms)
}

/// `sum_i W_i * phi(q_i, x_i)` over one group. Multi-group estimands sum
/// this over their groups.
pub fn km_integral<F>(group: &OrderedGroup, phi: F) -> Result<f64>
where
    F: Fn(f64, &[f64]) -> f64,
{
    km_weights(group).integrate(group, phi)
}

/// Support summary of one group.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GroupSupport {
    pub label: String,
    pub size: usize,
    pub max_q: f64,
    pub max_censored: bool,
    pub km_mass: f64,
}

/// Support summary across the groups entering an estimand.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SupportDiagnostics {
    pub groups: Vec<GroupSupport>,
    /// Smallest per-group maximum observed `q`.
    pub tau_h: f64,
    /// Set when some group's largest observation is censored; estimands then
    /// target the distribution truncated at that point.
    pub defective: bool,
}

impl SupportDiagnostics {
    pub fn defective_groups(&self) -> impl Iterator<Item = &GroupSupport> {
        self.groups.iter().filter(|g| g.max_censored)
    }
}

pub fn support_diagnostics<'a>(
    groups: impl IntoIterator<Item = (&'a str, &'a OrderedGroup)>,
) -> SupportDiagnostics {
    let groups: Vec<_> = groups
        .into_iter()
        .map(|(label, g)| GroupSupport {
            label: label.to_string(),
            size: g.size(),
            max_q: g.max_q(),
            max_censored: g.max_is_censored(),
            km_mass: km_weights(g).within_mass(),
        })
        .collect();
    let tau_h = groups
        .iter()
        .map(|g| g.max_q)
        .fold(f64::INFINITY, f64::min);
    let defective = groups.iter().any(|g| g.max_censored);
    if defective {
        for g in groups.iter().filter(|g| g.max_censored) {
            log::warn!(
                "largest observation in group {} is censored; KM mass {:.4}",
                g.label,
                g.km_mass
            );
        }
    }
    SupportDiagnostics {
        groups,
        tau_h,
        defective,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn group(q: &[f64], delta: &[u8]) -> OrderedGroup {
        let rows = q
            .iter()
            .zip(delta)
            .map(|(&q, &d)| Observation::new(q, d == 1, vec![], true))
            .collect();
        order_group(&CensoredSample::new(rows).unwrap(), |_| true).unwrap()
    }

    fn assert_close(a: &[f64], b: &[f64]) {
        assert_eq!(a.len(), b.len());
        for (x, y) in a.iter().zip(b) {
            assert!((x - y).abs() < 1e-12, "{a:?} vs {b:?}");
        }
    }

    #[test]
    fn ordering_sorts_with_concomitants() {
        let g = group(&[3.0, 1.0, 2.0], &[1, 1, 1]);
        assert_eq!(g.sorted_q(), &[1.0, 2.0, 3.0]);
        assert_eq!(g.original_index(), &[1, 2, 0]);
    }

    #[test]
    fn ties_put_uncensored_first() {
        let g = group(&[2.0, 2.0], &[0, 1]);
        assert_eq!(g.concomitant_delta(), &[true, false]);
        assert_eq!(g.original_index(), &[1, 0]);
        // product-limit oracle: S(2) = 1 - 1/2, censored unit leaves afterwards
        let f = km_cdf(&g).unwrap();
        assert_eq!(f.jump_points(), &[2.0]);
        assert_close(f.masses(), &[0.5]);
    }

    #[test]
    fn empty_selection_errors() {
        let rows = vec![Observation::new(1.0, true, vec![], false)];
        let s = CensoredSample::new(rows).unwrap();
        assert!(matches!(order_group(&s, |o| o.t), Err(Error::EmptyGroup(_))));
    }

    #[test]
    fn weight_fixtures() {
        assert_close(&km_weights(&group(&[1., 2., 3., 4.], &[1, 1, 1, 1])).weights(), &[0.25; 4]);
        assert_close(
            &km_weights(&group(&[1., 2., 3.], &[1, 0, 1])).weights(),
            &[1. / 3., 0., 2. / 3.],
        );
        let w = km_weights(&group(&[1., 2., 3.], &[1, 1, 0]));
        assert_close(&w.weights(), &[1. / 3., 1. / 3., 0.]);
        assert!((w.within_mass() - 2. / 3.).abs() < 1e-15);
    }

    #[test]
    fn weights_scale_by_group_fraction() {
        let rows = vec![
            Observation::new(1.0, true, vec![], true),
            Observation::new(2.0, true, vec![], true),
            Observation::new(5.0, true, vec![], false),
            Observation::new(6.0, true, vec![], false),
        ];
        let g = order_group(&CensoredSample::new(rows).unwrap(), |o| o.t).unwrap();
        let w = km_weights(&g);
        assert_eq!(w.group_fraction(), 0.5);
        assert_close(&w.weights(), &[0.25, 0.25]);
    }

    #[test]
    fn cdf_fixtures() {
        let f = km_cdf(&group(&[1., 2.], &[1, 1])).unwrap();
        assert_eq!(f.jump_points(), &[1.0, 2.0]);
        assert_close(f.masses(), &[0.5, 0.5]);
        let f = km_cdf(&group(&[1., 2., 3.], &[1, 0, 1])).unwrap();
        assert_eq!(f.jump_points(), &[1.0, 3.0]);
        assert_close(f.masses(), &[1. / 3., 2. / 3.]);
        assert!(matches!(
            km_cdf(&group(&[1., 2.], &[0, 0])),
            Err(Error::NoUncensored(_))
        ));
    }

    #[test]
    fn hazard_fixtures() {
        let h = cumulative_hazard(&group(&[1., 2.], &[1, 1]));
        assert_close(&h.increments, &[0.5, 1.0]);
        let h = cumulative_hazard(&group(&[1.], &[0]));
        assert!(h.locations.is_empty());
        let h = cumulative_hazard(&group(&[1., 2., 3.], &[1, 0, 1]));
        assert_eq!(h.locations, vec![1.0, 3.0]);
        assert_close(&h.increments, &[1. / 3., 1.0]);
    }

    #[test]
    fn hazard_route_matches_weights() {
        let g = group(&[1., 2., 3.], &[1, 0, 1]);
        assert_eq!(km_cdf_via_hazard(&g).unwrap().jump_points(), &[1.0, 3.0]);
        assert_close(km_cdf_via_hazard(&g).unwrap().masses(), km_cdf(&g).unwrap().masses());
        let g = group(&[0.3, 0.1, 0.7, 0.2], &[1, 1, 1, 1]);
        let f = km_cdf_via_hazard(&g).unwrap();
        assert_eq!(f.jump_points(), &[0.1, 0.2, 0.3, 0.7]);
        assert_close(f.masses(), &[0.25; 4]);
    }

    #[test]
    fn integral_fixtures() {
        let g = group(&[1., 2., 3.], &[1, 0, 1]);
        assert!((km_integral(&g, |_, _| 1.0).unwrap() - 1.0).abs() < 1e-15);
        assert!((km_integral(&g, |q, _| q).unwrap() - 7.0 / 3.0).abs() < 1e-14);
        let g = group(&[4., 1., 7.], &[1, 1, 1]);
        assert!((km_integral(&g, |q, _| q).unwrap() - 4.0).abs() < 1e-14);
    }

    #[test]
    fn integral_rejects_non_finite_at_positive_weight() {
        let g = group(&[1., 2., 3.], &[1, 0, 1]);
        // censored point carries no weight, so it is never evaluated
        assert!(km_integral(&g, |q, _| if q == 2.0 { f64::NAN } else { q }).is_ok());
        assert!(matches!(
            km_integral(&g, |q, _| if q == 3.0 { f64::INFINITY } else { q }),
            Err(Error::NonFiniteIntegrand(2))
        ));
    }

    #[test]
    fn support_fixtures() {
        let a = group(&[1., 2.], &[1, 1]);
        let b = group(&[0.5, 4.], &[1, 1]);
        let d = support_diagnostics([("a", &a), ("b", &b)]);
        assert!(!d.defective);
        assert_eq!(d.tau_h, 2.0);
        assert!(d.groups.iter().all(|g| (g.km_mass - 1.0).abs() < 1e-15));

        let c = group(&[1., 2., 3.], &[1, 1, 0]);
        let d = support_diagnostics([("c", &c)]);
        assert!(d.defective);
        assert!((d.groups[0].km_mass - 2. / 3.).abs() < 1e-15);
    }
}
