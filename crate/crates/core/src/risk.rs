//! Conditional value-at-risk on finite cost distributions.
//!
//! For a discrete cost `C` and tail fraction `alpha`,
//!
//! ```text
//! CVaR(C) = min_z  z + E[(C - z)+] / alpha
//! ```
//!
//! The objective is piecewise linear and convex in `z` with kinks only at the
//! atoms, so the minimum is attained at one of them. Evaluating every atom
//! is exact; no continuous search is needed.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{check_alpha, Action, AgentModel, Belief, PROB_TOL};
use crate::social::private_update;

/// A finite cost distribution with merged, sorted, positive-mass atoms.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteCostDistribution {
    atoms: Vec<(f64, f64)>,
}

impl DiscreteCostDistribution {
    /// Validates `(cost, probability)` pairs with tolerance [`PROB_TOL`].
    pub fn new(atoms: Vec<(f64, f64)>) -> Result<Self> {
        Self::with_tolerance(atoms, PROB_TOL)
    }

    pub fn with_tolerance(atoms: Vec<(f64, f64)>, tol: f64) -> Result<Self> {
        if atoms.is_empty() {
            return Err(Error::EmptyDistribution);
        }
        let mut total = 0.0;
        for (i, &(v, p)) in atoms.iter().enumerate() {
            if !v.is_finite() {
                return Err(Error::InvalidDistribution(format!(
                    "atom {} has cost {v}",
                    i + 1
                )));
            }
            if !p.is_finite() || p < 0.0 {
                return Err(Error::InvalidDistribution(format!(
                    "atom {} has probability {p}",
                    i + 1
                )));
            }
            total += p;
        }
        if (total - 1.0).abs() > tol {
            return Err(Error::InvalidDistribution(format!(
                "probabilities sum to {total}, expected 1"
            )));
        }
        Ok(Self::merged(atoms))
    }

    /// Costs `values[i]` with weights `probs[i]`; caller guarantees a valid
    /// probability vector (for example a normalized belief).
    pub(crate) fn from_weights(values: impl Iterator<Item = f64>, probs: &[f64]) -> Self {
        Self::merged(values.zip(probs.iter().copied()).collect())
    }

    fn merged(mut atoms: Vec<(f64, f64)>) -> Self {
        atoms.retain(|&(_, p)| p > 0.0);
        atoms.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut out: Vec<(f64, f64)> = Vec::with_capacity(atoms.len());
        for (v, p) in atoms {
            match out.last_mut() {
                Some(last) if last.0 == v => last.1 += p,
                _ => out.push((v, p)),
            }
        }
        DiscreteCostDistribution { atoms: out }
    }

    /// Distinct cost values in increasing order with their probabilities.
    pub fn atoms(&self) -> &[(f64, f64)] {
        &self.atoms
    }

    pub fn mean(&self) -> f64 {
        self.atoms.iter().map(|&(v, p)| v * p).sum()
    }

    /// `z + E[(C - z)+] / alpha` at an arbitrary `z`.
    pub fn cvar_objective(&self, z: f64, alpha: f64) -> f64 {
        let excess: f64 = self.atoms.iter().map(|&(v, p)| p * (v - z).max(0.0)).sum();
        z + excess / alpha
    }
}

/// CVaR value and the atom at which the objective is minimized.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Cvar {
    pub value: f64,
    pub z_star: f64,
}

/// Evaluates CVaR by scanning the atoms. Ties go to the smallest atom.
pub fn cvar_discrete(dist: &DiscreteCostDistribution, alpha: f64) -> Result<Cvar> {
    check_alpha(alpha)?;
    let atoms = dist.atoms();
    if atoms.is_empty() {
        return Err(Error::EmptyDistribution);
    }
    // Suffix sums of mass and mass*value strictly above each atom.
    let n = atoms.len();
    let mut tail_mass = vec![0.0; n];
    let mut tail_moment = vec![0.0; n];
    for i in (0..n - 1).rev() {
        let (v, p) = atoms[i + 1];
        tail_mass[i] = tail_mass[i + 1] + p;
        tail_moment[i] = tail_moment[i + 1] + p * v;
    }
    let objective = |i: usize| {
        let z = atoms[i].0;
        z + (tail_moment[i] - z * tail_mass[i]).max(0.0) / alpha
    };
    let mut best = Cvar {
        value: objective(0),
        z_star: atoms[0].0,
    };
    for (i, &(z, _)) in atoms.iter().enumerate().skip(1) {
        let h = objective(i);
        let slack = 1e-12 * best.value.abs().max(1.0);
        if h < best.value - slack {
            best = Cvar {
                value: h,
                z_star: z,
            };
        }
    }
    Ok(best)
}

/// CVaR of `c(., action)` under a belief over states.
pub(crate) fn cvar_under(model: &AgentModel, belief: &Belief, action: Action) -> f64 {
    let column = model.cost_matrix().column(action.index());
    let dist = DiscreteCostDistribution::from_weights(column.iter().copied(), belief.as_slice());
    cvar_discrete(&dist, model.alpha())
        .map(|c| c.value)
        .expect("alpha validated by the model")
}

/// Risk-adjusted cost of `action` for an agent with public belief `pi` that
/// observes `y` (0-based): CVaR of the action's cost under the private
/// posterior.
pub fn risk_adjusted_cost(
    model: &AgentModel,
    pi: &Belief,
    y: usize,
    action: Action,
) -> Result<f64> {
    let eta = private_update(model, pi, y)?;
    Ok(cvar_under(model, &eta, action))
}
