//! Private and public (social learning) belief updates, the agent's
//! risk-averse decision rule, and belief-space region analysis.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{simplex_lattice, Action, AgentModel, Belief};
use crate::risk::cvar_under;

/// Default number of scan points for region analysis.
pub const DEFAULT_REGION_GRID: usize = 10_000;

/// Bisection tolerance for region boundaries.
pub const BOUNDARY_TOL: f64 = 1e-8;

/// Posterior of an agent that sees observation `y` (0-based) given the
/// public belief `pi`.
pub fn private_update(model: &AgentModel, pi: &Belief, y: usize) -> Result<Belief> {
    model.check_belief(pi)?;
    model.check_observation(y)?;
    let predicted = model.predict(pi);
    private_from_predicted(model, &predicted, y)
}

fn private_from_predicted(
    model: &AgentModel,
    predicted: &DVector<f64>,
    y: usize,
) -> Result<Belief> {
    let weighted = predicted.component_mul(&model.observation_matrix().column(y));
    Belief::normalized(weighted).ok_or(Error::ImpossibleObservation { observation: y + 1 })
}

/// Decision given an already computed private belief. Buy wins ties.
pub(crate) fn decide(model: &AgentModel, eta: &Belief) -> Action {
    let buy = cvar_under(model, eta, Action::Buy);
    let sell = cvar_under(model, eta, Action::Sell);
    let slack = 1e-12 * buy.abs().max(sell.abs()).max(1.0);
    if buy <= sell + slack {
        Action::Buy
    } else {
        Action::Sell
    }
}

/// Action minimizing the risk-adjusted cost after observing `y`.
pub fn agent_decision(model: &AgentModel, pi: &Belief, y: usize) -> Result<Action> {
    let eta = private_update(model, pi, y)?;
    Ok(decide(model, &eta))
}

/// How each possible observation maps to an action at a fixed public belief,
/// and the resulting action likelihoods per state.
#[derive(Debug, Clone, PartialEq)]
pub struct DecisionProfile {
    /// Action taken after each observation.
    pub actions: Vec<Action>,
    /// `Y x 2` indicator matrix: `m[(y, a)] = 1` iff `actions[y] == a`.
    pub m: DMatrix<f64>,
    /// `X x 2` action likelihoods `B * M`.
    pub r: DMatrix<f64>,
    /// Observations with zero predicted probability; their rows default to buy.
    pub impossible: Vec<bool>,
}

impl DecisionProfile {
    /// True when every observation leads to the same action.
    pub fn is_herding(&self) -> bool {
        self.actions.windows(2).all(|w| w[0] == w[1])
    }
}

pub(crate) fn indicator_matrix(actions: &[Action]) -> DMatrix<f64> {
    let mut m = DMatrix::zeros(actions.len(), 2);
    for (y, a) in actions.iter().enumerate() {
        m[(y, a.index())] = 1.0;
    }
    m
}

fn profile_from_predicted(model: &AgentModel, predicted: &DVector<f64>) -> DecisionProfile {
    let ny = model.observations();
    let mut actions = Vec::with_capacity(ny);
    let mut impossible = vec![false; ny];
    for (y, flag) in impossible.iter_mut().enumerate() {
        match private_from_predicted(model, predicted, y) {
            Ok(eta) => actions.push(decide(model, &eta)),
            Err(_) => {
                *flag = true;
                actions.push(Action::Buy);
            }
        }
    }
    let m = indicator_matrix(&actions);
    let r = model.observation_matrix() * &m;
    DecisionProfile {
        actions,
        m,
        r,
        impossible,
    }
}

pub fn decision_profile(model: &AgentModel, pi: &Belief) -> Result<DecisionProfile> {
    model.check_belief(pi)?;
    Ok(profile_from_predicted(model, &model.predict(pi)))
}

/// Outcome of the public belief update after an observed action.
#[derive(Debug, Clone, PartialEq)]
pub struct PublicUpdate {
    pub belief: Belief,
    /// Probability of the observed action given `pi`.
    pub sigma: f64,
}

/// Both action branches of the social learning filter at `pi`; `None` for
/// an action with zero probability.
pub fn action_branches(model: &AgentModel, pi: &Belief) -> Result<[Option<PublicUpdate>; 2]> {
    model.check_belief(pi)?;
    let predicted = model.predict(pi);
    let profile = profile_from_predicted(model, &predicted);
    Ok(Action::ALL.map(|a| branch(&profile, &predicted, a)))
}

fn branch(profile: &DecisionProfile, predicted: &DVector<f64>, a: Action) -> Option<PublicUpdate> {
    let weighted = profile.r.column(a.index()).component_mul(predicted);
    let sigma = weighted.sum();
    if sigma > 0.0 {
        Belief::normalized(weighted).map(|belief| PublicUpdate { belief, sigma })
    } else {
        None
    }
}

/// Public belief after observing action `a`.
pub fn public_update(model: &AgentModel, pi: &Belief, a: Action) -> Result<PublicUpdate> {
    let [buy, sell] = action_branches(model, pi)?;
    let chosen = match a {
        Action::Buy => buy,
        Action::Sell => sell,
    };
    chosen.ok_or(Error::ImpossibleAction { action: a.code() })
}

// ---------------------------------------------------------------------------
// Region analysis
// ---------------------------------------------------------------------------

/// A maximal interval of `pi(2)` on which the decision profile is constant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegionInterval {
    pub lower: f64,
    pub upper: f64,
    pub actions: Vec<Action>,
}

impl RegionInterval {
    pub fn m(&self) -> DMatrix<f64> {
        indicator_matrix(&self.actions)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum RegionTable {
    /// Two-state models: a partition of `[0, 1]` in `pi(2)`.
    Intervals(Vec<RegionInterval>),
    /// Larger models: decision profile at each simplex lattice point.
    Points(Vec<(Belief, Vec<Action>)>),
}

impl RegionTable {
    pub fn distinct_profiles(&self) -> usize {
        let mut labels: Vec<&Vec<Action>> = match self {
            RegionTable::Intervals(iv) => iv.iter().map(|r| &r.actions).collect(),
            RegionTable::Points(pts) => pts.iter().map(|p| &p.1).collect(),
        };
        labels.sort();
        labels.dedup();
        labels.len()
    }
}

/// Uniform grid `0, 1/(n-1), ..., 1`.
pub fn unit_grid(points: usize) -> Vec<f64> {
    let last = (points - 1) as f64;
    (0..points).map(|i| i as f64 / last).collect()
}

/// Smallest `t` in `(lo, hi]` where `label(t)` differs from `label(lo)`, to
/// within `tol`.
pub(crate) fn bisect_change<L: PartialEq>(
    mut lo: f64,
    mut hi: f64,
    tol: f64,
    label: impl Fn(f64) -> L,
) -> f64 {
    let start = label(lo);
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        if label(mid) == start {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

fn profile_at(model: &AgentModel, p2: f64) -> Vec<Action> {
    profile_from_predicted(model, &model.predict(&Belief::from_pi2(p2))).actions
}

/// Maps the decision profile over the belief space.
pub fn partition_scan(model: &AgentModel, grid_points: usize) -> Result<RegionTable> {
    if grid_points < 2 {
        return Err(Error::InvalidSolverConfig(format!(
            "region grid needs at least 2 points, got {grid_points}"
        )));
    }
    let x = model.states();
    if x != 2 {
        let mut resolution = 1;
        while lattice_size(x, resolution + 1) <= grid_points {
            resolution += 1;
        }
        let points = simplex_lattice(x, resolution)
            .into_par_iter()
            .map(|b| {
                let acts = profile_from_predicted(model, &model.predict(&b)).actions;
                (b, acts)
            })
            .collect();
        return Ok(RegionTable::Points(points));
    }

    let grid = unit_grid(grid_points);
    let labels: Vec<Vec<Action>> = grid.par_iter().map(|&p| profile_at(model, p)).collect();
    let mut intervals = Vec::new();
    let mut lower = 0.0;
    for i in 0..grid_points - 1 {
        if labels[i] != labels[i + 1] {
            let edge = bisect_change(grid[i], grid[i + 1], BOUNDARY_TOL, |p| profile_at(model, p));
            intervals.push(RegionInterval {
                lower,
                upper: edge,
                actions: labels[i].clone(),
            });
            lower = edge;
        }
    }
    intervals.push(RegionInterval {
        lower,
        upper: 1.0,
        actions: labels[grid_points - 1].clone(),
    });
    Ok(RegionTable::Intervals(intervals))
}

fn lattice_size(states: usize, resolution: usize) -> usize {
    // C(resolution + states - 1, states - 1)
    let mut c: usize = 1;
    for k in 1..states {
        c = c.saturating_mul(resolution + k) / k;
    }
    c
}

/// One row of the social-learning-region sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegionRow {
    pub alpha: f64,
    /// Where the agent observing `y = 2` switches action (lower boundary).
    pub pi_double_star: Option<f64>,
    /// Where the agent observing `y = 1` switches action (upper boundary).
    pub pi_star: Option<f64>,
    /// Measure of the set where buy follows `y = 1` and sell follows `y = 2`.
    pub width: f64,
    pub crossings_low: Vec<f64>,
    pub crossings_high: Vec<f64>,
    /// Set when either decision switches more than once.
    pub non_monotone: bool,
}

fn decision_crossings(model: &AgentModel, grid: &[f64], y: usize) -> Vec<f64> {
    let decide_at = |p: f64| {
        let predicted = model.predict(&Belief::from_pi2(p));
        private_from_predicted(model, &predicted, y)
            .map(|eta| decide(model, &eta))
            .ok()
    };
    let labels: Vec<Option<Action>> = grid.par_iter().map(|&p| decide_at(p)).collect();
    let mut out = Vec::new();
    for i in 0..grid.len() - 1 {
        if labels[i] != labels[i + 1] {
            out.push(bisect_change(grid[i], grid[i + 1], BOUNDARY_TOL, decide_at));
        }
    }
    out
}

fn learning_width(model: &AgentModel, low: &[f64], high: &[f64]) -> f64 {
    let mut cuts: Vec<f64> = std::iter::once(0.0)
        .chain(low.iter().copied())
        .chain(high.iter().copied())
        .chain(std::iter::once(1.0))
        .collect();
    cuts.sort_by(f64::total_cmp);
    cuts.windows(2)
        .filter(|w| w[1] > w[0])
        .filter(|w| profile_at(model, 0.5 * (w[0] + w[1])) == [Action::Buy, Action::Sell])
        .map(|w| w[1] - w[0])
        .sum()
}

/// Locates the social-learning region boundaries for each `alpha`.
pub fn learning_region_sweep(
    base: &AgentModel,
    alphas: &[f64],
    grid_points: usize,
) -> Result<Vec<RegionRow>> {
    if base.states() != 2 || base.observations() != 2 {
        return Err(Error::model(
            "model",
            "region sweep needs two states and two observations",
        ));
    }
    if grid_points < 2 {
        return Err(Error::InvalidSolverConfig(format!(
            "region grid needs at least 2 points, got {grid_points}"
        )));
    }
    let grid = unit_grid(grid_points);
    alphas
        .iter()
        .map(|&alpha| {
            let model = base.with_alpha(alpha)?;
            let low = decision_crossings(&model, &grid, 1);
            let high = decision_crossings(&model, &grid, 0);
            let single = |v: &[f64]| if v.len() == 1 { Some(v[0]) } else { None };
            Ok(RegionRow {
                alpha,
                pi_double_star: single(&low),
                pi_star: single(&high),
                width: learning_width(&model, &low, &high),
                non_monotone: low.len() > 1 || high.len() > 1,
                crossings_low: low,
                crossings_high: high,
            })
        })
        .collect()
}
