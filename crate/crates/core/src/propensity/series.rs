//! Power-series basis for the series logit: monomials `x^lambda` with
//! multi-indices in nondecreasing total degree, graded-lexicographic within a
//! degree (`x1` before `x2`). Covariates are mapped to `[-1, 1]` first.

use serde::{Deserialize, Serialize};

/// Multi-indices of total degree `degree` in `k` variables, graded-lex order.
fn multi_indices_of_degree(k: usize, degree: u32) -> Vec<Vec<u32>> {
    if k == 0 {
        return if degree == 0 { vec![vec![]] } else { vec![] };
    }
    let mut out = Vec::new();
    for first in (0..=degree).rev() {
        for rest in multi_indices_of_degree(k - 1, degree - first) {
            let mut idx = Vec::with_capacity(k);
            idx.push(first);
            idx.extend(rest);
            out.push(idx);
        }
    }
    out
}

/// The first `count` multi-indices of the basis sequence.
pub fn basis_terms(k: usize, count: usize) -> Vec<Vec<u32>> {
    let mut terms = Vec::with_capacity(count);
    let mut degree = 0;
    while terms.len() < count {
        let level = multi_indices_of_degree(k, degree);
        if level.is_empty() {
            break;
        }
        terms.extend(level);
        degree += 1;
    }
    terms.truncate(count);
    terms
}

/// Number of monomials with total degree `<= degree` in `k` variables.
pub fn terms_up_to_degree(k: usize, degree: u32) -> usize {
    (0..=degree).map(|d| multi_indices_of_degree(k, d).len()).sum()
}

/// Affine map of each covariate onto `[-1, 1]` using training extremes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UnitScaling {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl UnitScaling {
    pub fn fit(x: &[Vec<f64>], k: usize) -> Self {
        let mut lo = vec![f64::INFINITY; k];
        let mut hi = vec![f64::NEG_INFINITY; k];
        for row in x {
            for j in 0..k {
                lo[j] = lo[j].min(row[j]);
                hi[j] = hi[j].max(row[j]);
            }
        }
        Self { lo, hi }
    }

    pub fn apply(&self, row: &[f64]) -> Vec<f64> {
        row.iter()
            .enumerate()
            .map(|(j, &v)| {
                let span = self.hi[j] - self.lo[j];
                if span > 0.0 {
                    2.0 * (v - self.lo[j]) / span - 1.0
                } else {
                    0.0
                }
            })
            .collect()
    }
}

pub fn evaluate_terms(terms: &[Vec<u32>], scaled: &[f64]) -> Vec<f64> {
    terms
        .iter()
        .map(|lambda| {
            lambda
                .iter()
                .zip(scaled)
                .map(|(&p, &v)| v.powi(p as i32))
                .product()
        })
        .collect()
}

/// Indices of columns that are numerically independent of the columns kept
/// before them (modified Gram-Schmidt, relative tolerance `1e-8`).
pub fn independent_columns(columns: &[Vec<f64>]) -> Vec<usize> {
    let mut basis: Vec<Vec<f64>> = Vec::new();
    let mut kept = Vec::new();
    for (j, col) in columns.iter().enumerate() {
        let norm0 = col.iter().map(|v| v * v).sum::<f64>().sqrt();
        let mut r = col.clone();
        for q in &basis {
            let dot: f64 = r.iter().zip(q).map(|(a, b)| a * b).sum();
            r.iter_mut().zip(q).for_each(|(a, b)| *a -= dot * b);
        }
        let norm = r.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm0 > 0.0 && norm > 1e-8 * norm0 {
            r.iter_mut().for_each(|v| *v /= norm);
            basis.push(r);
            kept.push(j);
        }
    }
    kept
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn univariate_cubic_sequence() {
        assert_eq!(basis_terms(1, 4), vec![vec![0], vec![1], vec![2], vec![3]]);
    }

    #[test]
    fn bivariate_order() {
        let t = basis_terms(2, 6);
        assert_eq!(
            t,
            vec![
                vec![0, 0],
                vec![1, 0],
                vec![0, 1],
                vec![2, 0],
                vec![1, 1],
                vec![0, 2]
            ]
        );
        assert_eq!(terms_up_to_degree(2, 3), 10);
    }

    #[test]
    fn no_covariates_gives_intercept_only() {
        assert_eq!(basis_terms(0, 5), vec![Vec::<u32>::new()]);
    }

    #[test]
    fn collinear_column_dropped() {
        let x = [0.0, 1.0, 1.0, 0.0, 1.0];
        let ones = vec![1.0; 5];
        let lin = x.to_vec();
        let sq: Vec<f64> = x.iter().map(|v| v * v).collect();
        assert_eq!(independent_columns(&[ones, lin, sq]), vec![0, 1]);
    }
}
