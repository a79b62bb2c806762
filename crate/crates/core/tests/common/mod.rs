//! Random model generators shared by the integration tests.
#![allow(dead_code)]

use herdwatch_core::{AgentModel, Belief};
use nalgebra::DMatrix;
use rand::Rng;

pub fn probability_vector<R: Rng>(rng: &mut R, n: usize) -> Vec<f64> {
    let raw: Vec<f64> = (0..n).map(|_| rng.random_range(0.05..1.0)).collect();
    let total: f64 = raw.iter().sum();
    raw.into_iter().map(|v| v / total).collect()
}

pub fn random_belief<R: Rng>(rng: &mut R, n: usize) -> Belief {
    Belief::new(probability_vector(rng, n)).unwrap()
}

/// Two-row observation matrix whose likelihood ratio row2/row1 increases
/// in the observation index, which makes it TP2.
pub fn tp2_observations<R: Rng>(rng: &mut R, y: usize) -> DMatrix<f64> {
    let first = probability_vector(rng, y);
    let mut ratios: Vec<f64> = (0..y).map(|_| rng.random_range(0.1..5.0)).collect();
    ratios.sort_by(f64::total_cmp);
    let second: Vec<f64> = first.iter().zip(&ratios).map(|(b, r)| b * r).collect();
    let total: f64 = second.iter().sum();
    DMatrix::from_fn(
        2,
        y,
        |i, j| if i == 0 { first[j] } else { second[j] / total },
    )
}

pub fn geometric_transitions(exit: f64) -> DMatrix<f64> {
    DMatrix::from_row_slice(2, 2, &[1.0, 0.0, exit, 1.0 - exit])
}

/// Two-state cost matrix with `c(x,2) - c(x,1)` non-increasing in `x` when
/// `reversed`, non-decreasing otherwise.
pub fn submodular_costs<R: Rng>(rng: &mut R, reversed: bool) -> DMatrix<f64> {
    let mut gaps = [rng.random_range(-3.0..3.0), rng.random_range(-3.0..3.0)];
    gaps.sort_by(f64::total_cmp);
    if reversed {
        gaps.reverse();
    }
    let buy = [rng.random_range(0.0..3.0), rng.random_range(0.0..3.0)];
    DMatrix::from_fn(2, 2, |x, a| if a == 0 { buy[x] } else { buy[x] + gaps[x] })
}

/// Two-state model with TP2 `B` and `P` and (reversed) submodular costs.
pub fn certified_model<R: Rng>(rng: &mut R, y: usize) -> AgentModel {
    let b = tp2_observations(rng, y);
    let p = geometric_transitions(rng.random_range(0.0..0.3));
    let c = submodular_costs(rng, true);
    AgentModel::new(b, p, c, rng.random_range(0.05..=1.0)).unwrap()
}

/// Arbitrary row-stochastic model with `states` states, state 0 absorbing.
pub fn random_model<R: Rng>(
    rng: &mut R,
    states: usize,
    observations: usize,
    alpha: f64,
) -> AgentModel {
    let b = DMatrix::from_fn(states, observations, |_, _| 0.0);
    let mut b = b;
    for x in 0..states {
        let row = probability_vector(rng, observations);
        for (y, v) in row.into_iter().enumerate() {
            b[(x, y)] = v;
        }
    }
    let mut p = DMatrix::zeros(states, states);
    p[(0, 0)] = 1.0;
    for x in 1..states {
        let row = probability_vector(rng, states);
        for (j, v) in row.into_iter().enumerate() {
            p[(x, j)] = v;
        }
    }
    let c = DMatrix::from_fn(states, 2, |_, _| rng.random_range(-2.0..4.0));
    AgentModel::new_with_tolerance(b, p, c, alpha, 1e-9).unwrap()
}
