//! Market observer: stop/continue costs, value iteration on a `pi(2)` grid,
//! and stopping-set geometry.
//!
//! The solver handles two-state models. Successor beliefs are computed
//! exactly at each grid point and their values read off the current value
//! function by linear interpolation.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{AgentModel, Belief};
use crate::social::{action_branches, bisect_change, unit_grid};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ObserverAction {
    Stop,
    Continue,
}

impl ObserverAction {
    /// External code: 1 = stop, 2 = continue.
    pub fn code(self) -> u8 {
        match self {
            ObserverAction::Stop => 1,
            ObserverAction::Continue => 2,
        }
    }
}

/// False-alarm weights, delay cost and discount.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObserverModel {
    f: Vec<f64>,
    d: f64,
    rho: f64,
}

impl ObserverModel {
    pub fn new(f: Vec<f64>, d: f64, rho: f64) -> Result<Self> {
        if f.is_empty() {
            return Err(Error::model("observer.f", "empty weight vector"));
        }
        if f[0] != 0.0 {
            return Err(Error::model("observer.f", "weight of state 1 must be 0"));
        }
        if f.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::model(
                "observer.f",
                "weights must be finite and nonnegative",
            ));
        }
        if f.windows(2).any(|w| w[1] < w[0]) {
            return Err(Error::model("observer.f", "weights must be non-decreasing"));
        }
        if !(d > 0.0 && d.is_finite()) {
            return Err(Error::model(
                "observer.d",
                format!("delay cost must be positive, got {d}"),
            ));
        }
        if !(0.0..=1.0).contains(&rho) {
            return Err(Error::model(
                "observer.rho",
                format!("discount must lie in [0, 1], got {rho}"),
            ));
        }
        Ok(ObserverModel { f, d, rho })
    }

    pub fn false_alarm_weights(&self) -> &[f64] {
        &self.f
    }

    pub fn delay_cost(&self) -> f64 {
        self.d
    }

    pub fn discount(&self) -> f64 {
        self.rho
    }

    pub fn with_discount(&self, rho: f64) -> Result<Self> {
        Self::new(self.f.clone(), self.d, rho)
    }

    pub fn with_delay_cost(&self, d: f64) -> Result<Self> {
        Self::new(self.f.clone(), d, self.rho)
    }

    fn stop_cost(&self, pi: &[f64]) -> f64 {
        self.f.iter().zip(pi).map(|(f, p)| f * p).sum()
    }

    fn wait_cost(&self, pi: &[f64]) -> f64 {
        self.d * pi[0]
    }
}

/// Expected one-step cost: `f'pi` for stop, `d pi(1)` for continue.
pub fn observer_cost(obs: &ObserverModel, pi: &Belief, u: ObserverAction) -> Result<f64> {
    if pi.len() != obs.f.len() {
        return Err(Error::DimensionMismatch {
            expected: obs.f.len(),
            found: pi.len(),
        });
    }
    Ok(match u {
        ObserverAction::Stop => obs.stop_cost(pi.as_slice()),
        ObserverAction::Continue => obs.wait_cost(pi.as_slice()),
    })
}

/// Value-iteration settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverConfig {
    pub grid_points: usize,
    pub tol: f64,
    pub max_iter: usize,
    /// Finite horizon: backward induction for this many stages.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub horizon: Option<usize>,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            grid_points: 2001,
            tol: 1e-9,
            max_iter: 100_000,
            horizon: None,
        }
    }
}

/// Successor of a grid point under one action.
#[derive(Debug, Clone, Copy, PartialEq)]
struct Successor {
    sigma: f64,
    pi2: f64,
}

type Branches = [Option<Successor>; 2];

fn branches_at(model: &AgentModel, p2: f64) -> Branches {
    let pi = Belief::from_pi2(p2);
    let b = action_branches(model, &pi).expect("two-state belief matches a two-state model");
    b.map(|o| {
        o.map(|u| Successor {
            sigma: u.sigma,
            pi2: u.belief.pi2(),
        })
    })
}

/// Linear interpolation of grid values at `p2`.
fn interpolate(values: &[f64], p2: f64) -> f64 {
    let last = values.len() - 1;
    let t = p2.clamp(0.0, 1.0) * last as f64;
    let i = (t.floor() as usize).min(last - 1);
    let w = t - i as f64;
    values[i] * (1.0 - w) + values[i + 1] * w
}

/// A solved observer policy on a `pi(2)` grid.
#[derive(Debug, Clone)]
pub struct SolvedPolicy {
    model: AgentModel,
    observer: ObserverModel,
    pub grid: Vec<f64>,
    pub values: Vec<f64>,
    /// Values used inside the continuation term: equal to `values` for the
    /// discounted problem, the next stage for a finite horizon.
    pub successor_values: Vec<f64>,
    pub actions: Vec<ObserverAction>,
    /// Final sup-norm Bellman residual.
    pub residual: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Sup-norm change of each sweep.
    pub diff_history: Vec<f64>,
    branches: Vec<Branches>,
}

impl SolvedPolicy {
    pub fn model(&self) -> &AgentModel {
        &self.model
    }

    pub fn observer(&self) -> &ObserverModel {
        &self.observer
    }

    /// Action at the grid point nearest to `pi(2)`.
    pub fn action_at(&self, p2: f64) -> ObserverAction {
        let last = self.grid.len() - 1;
        let i = (p2.clamp(0.0, 1.0) * last as f64).round() as usize;
        self.actions[i.min(last)]
    }

    /// Interpolated value at `pi(2)`.
    pub fn value_at(&self, p2: f64) -> f64 {
        interpolate(&self.values, p2)
    }

    fn continuation(&self, p2: f64, branches: &Branches) -> f64 {
        continuation_value(&self.observer, p2, branches, &self.successor_values)
    }

    /// Stop and continue operands of the Bellman equation at any `pi(2)`.
    pub fn bellman_operands(&self, p2: f64) -> (f64, f64) {
        let pi = [1.0 - p2, p2];
        let b = branches_at(&self.model, p2);
        (self.observer.stop_cost(&pi), self.continuation(p2, &b))
    }

    fn operands_on_grid(&self, values: &[f64]) -> Vec<(f64, f64)> {
        self.grid
            .par_iter()
            .zip(self.branches.par_iter())
            .map(|(&p2, b)| {
                let pi = [1.0 - p2, p2];
                (
                    self.observer.stop_cost(&pi),
                    continuation_value(&self.observer, p2, b, values),
                )
            })
            .collect()
    }

    /// Per-point `|min(stop, continue) - V|`.
    pub fn bellman_residuals(&self) -> Vec<f64> {
        self.operands_on_grid(&self.successor_values)
            .into_iter()
            .zip(&self.values)
            .map(|((s, c), v)| (s.min(c) - v).abs())
            .collect()
    }

    /// Recomputes actions from the stored values with the stop-on-tie rule.
    pub fn actions_from_values(&self) -> Vec<ObserverAction> {
        self.operands_on_grid(&self.successor_values)
            .into_iter()
            .map(|(s, c)| choose(s, c))
            .collect()
    }
}

fn continuation_value(obs: &ObserverModel, p2: f64, branches: &Branches, values: &[f64]) -> f64 {
    let expected: f64 = branches
        .iter()
        .flatten()
        .map(|s| s.sigma * interpolate(values, s.pi2))
        .sum();
    obs.d * (1.0 - p2) + obs.rho * expected
}

fn choose(stop: f64, cont: f64) -> ObserverAction {
    if stop <= cont {
        ObserverAction::Stop
    } else {
        ObserverAction::Continue
    }
}

fn check_inputs(model: &AgentModel, obs: &ObserverModel, config: &SolverConfig) -> Result<()> {
    if model.states() != 2 {
        return Err(Error::InvalidSolverConfig(format!(
            "the solver handles two-state models, got {} states",
            model.states()
        )));
    }
    if obs.f.len() != model.states() {
        return Err(Error::model(
            "observer.f",
            format!("expected {} weights, got {}", model.states(), obs.f.len()),
        ));
    }
    if config.grid_points < 2 {
        return Err(Error::InvalidSolverConfig(
            "grid_points must be at least 2".into(),
        ));
    }
    if config.tol.is_nan() || config.tol <= 0.0 {
        return Err(Error::InvalidSolverConfig("tol must be positive".into()));
    }
    if config.horizon.is_none() && obs.rho >= 1.0 {
        return Err(Error::InvalidSolverConfig(
            "rho = 1 requires a finite horizon".into(),
        ));
    }
    if config.horizon == Some(0) {
        return Err(Error::InvalidSolverConfig(
            "horizon must be at least 1".into(),
        ));
    }
    Ok(())
}

/// Solves the observer's stopping problem.
///
/// Without a horizon this is value iteration from `V = 0` until the
/// sup-norm change is at most `tol`; if `max_iter` is hit first the result
/// has `converged = false`. With a horizon it is backward induction from a
/// forced stop at the last stage.
pub fn solve(
    model: &AgentModel,
    obs: &ObserverModel,
    config: &SolverConfig,
) -> Result<SolvedPolicy> {
    check_inputs(model, obs, config)?;
    let grid = unit_grid(config.grid_points);
    let branches: Vec<Branches> = grid.par_iter().map(|&p| branches_at(model, p)).collect();
    let stop: Vec<f64> = grid.iter().map(|&p| obs.stop_cost(&[1.0 - p, p])).collect();

    let sweep = |values: &[f64]| -> Vec<f64> {
        grid.par_iter()
            .zip(branches.par_iter())
            .zip(stop.par_iter())
            .map(|((&p2, b), &s)| s.min(continuation_value(obs, p2, b, values)))
            .collect()
    };
    let sup_diff = |a: &[f64], b: &[f64]| {
        a.iter()
            .zip(b)
            .map(|(x, y)| (x - y).abs())
            .fold(0.0, f64::max)
    };

    let mut diff_history = Vec::new();
    let (values, successor_values, iterations, converged) = match config.horizon {
        Some(h) => {
            let mut next = stop.clone();
            let mut current = stop.clone();
            for _ in 0..h {
                current = sweep(&next);
                diff_history.push(sup_diff(&current, &next));
                if diff_history.len() < h {
                    next = current.clone();
                }
            }
            (current, next, h, true)
        }
        None => {
            let mut v = vec![0.0; grid.len()];
            let mut converged = false;
            let mut iterations = 0;
            while iterations < config.max_iter {
                let next = sweep(&v);
                let diff = sup_diff(&next, &v);
                diff_history.push(diff);
                v = next;
                iterations += 1;
                if diff <= config.tol {
                    converged = true;
                    break;
                }
            }
            (v.clone(), v, iterations, converged)
        }
    };

    let mut policy = SolvedPolicy {
        model: model.clone(),
        observer: obs.clone(),
        grid,
        values,
        successor_values,
        actions: Vec::new(),
        residual: 0.0,
        iterations,
        converged,
        diff_history,
        branches,
    };
    policy.actions = policy.actions_from_values();
    policy.residual = policy.bellman_residuals().into_iter().fold(0.0, f64::max);
    Ok(policy)
}

/// Maximal stop intervals of a solved policy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StoppingSetReport {
    /// Disjoint, sorted `[lower, upper]` intervals in `pi(2)`.
    pub intervals: Vec<(f64, f64)>,
    pub is_convex: bool,
    /// All interval endpoints in increasing order.
    pub thresholds: Vec<f64>,
}

impl StoppingSetReport {
    /// Upper end of the stop interval containing `pi(2) = 0`.
    pub fn upper_threshold(&self) -> Option<f64> {
        self.intervals
            .first()
            .filter(|iv| iv.0 == 0.0)
            .map(|iv| iv.1)
    }
}

/// Endpoint refinement tolerance.
pub const THRESHOLD_TOL: f64 = 1e-6;

/// Extracts stop intervals from the grid actions and refines each interior
/// endpoint by bisection on the two Bellman operands.
pub fn stopping_set_analysis(policy: &SolvedPolicy) -> StoppingSetReport {
    let grid = &policy.grid;
    let n = grid.len();
    let label = |p2: f64| {
        let (s, c) = policy.bellman_operands(p2);
        choose(s, c)
    };
    let mut intervals = Vec::new();
    let mut open: Option<f64> = (policy.actions[0] == ObserverAction::Stop).then_some(0.0);
    for i in 0..n - 1 {
        let (a, b) = (policy.actions[i], policy.actions[i + 1]);
        if a == b {
            continue;
        }
        let edge = bisect_change(grid[i], grid[i + 1], THRESHOLD_TOL, label);
        match b {
            ObserverAction::Stop => open = Some(edge),
            ObserverAction::Continue => {
                if let Some(lower) = open.take() {
                    intervals.push((lower, edge));
                }
            }
        }
    }
    if let Some(lower) = open {
        intervals.push((lower, 1.0));
    }
    let thresholds = intervals.iter().flat_map(|&(a, b)| [a, b]).collect();
    StoppingSetReport {
        is_convex: intervals.len() <= 1,
        intervals,
        thresholds,
    }
}

/// A grid cell where `V` changes much faster than in neighboring cells.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ValueJump {
    /// Midpoint of the cell.
    pub pi2: f64,
    pub jump: f64,
    /// Largest change over the two cells on either side.
    pub local_variation: f64,
}

/// Cells whose value change exceeds `factor` times the local variation.
pub fn value_discontinuities(policy: &SolvedPolicy, factor: f64) -> Vec<ValueJump> {
    let v = &policy.values;
    let deltas: Vec<f64> = v.windows(2).map(|w| (w[1] - w[0]).abs()).collect();
    let n = deltas.len();
    (0..n)
        .filter_map(|i| {
            let local = [i.wrapping_sub(2), i.wrapping_sub(1), i + 1, i + 2]
                .into_iter()
                .filter(|&j| j < n)
                .map(|j| deltas[j])
                .fold(0.0, f64::max);
            let jump = deltas[i];
            (jump > 1e-9 && jump > factor * local).then(|| ValueJump {
                pi2: 0.5 * (policy.grid[i] + policy.grid[i + 1]),
                jump,
                local_variation: local,
            })
        })
        .collect()
}
