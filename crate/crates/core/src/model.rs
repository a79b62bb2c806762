//! Agent model, beliefs, and the structural assumption checks.
//!
//! # Index conventions
//!
//! Internally states, observations and actions are 0-based. State `0` is
//! always the post-change absorbing state (written "state 1" in files and
//! on the command line, which use 1-based numbering). Row 0 of the
//! transition matrix must therefore be the unit vector `e_0`.
//!
//! Actions are the two-element [`Action`] enum; `Buy` has code 1 and `Sell`
//! code 2.

use std::fmt;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Absolute tolerance used for probability sums and ordering comparisons.
pub const PROB_TOL: f64 = 1e-12;

/// Agent trading action.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Action {
    Buy,
    Sell,
}

impl Action {
    pub const ALL: [Action; 2] = [Action::Buy, Action::Sell];

    /// Column index into the cost matrix.
    pub fn index(self) -> usize {
        match self {
            Action::Buy => 0,
            Action::Sell => 1,
        }
    }

    /// External 1-based code (1 = buy, 2 = sell).
    pub fn code(self) -> u8 {
        self.index() as u8 + 1
    }

    pub fn from_code(code: u8) -> Option<Self> {
        match code {
            1 => Some(Action::Buy),
            2 => Some(Action::Sell),
            _ => None,
        }
    }

    pub fn from_index(index: usize) -> Option<Self> {
        Self::ALL.get(index).copied()
    }
}

impl fmt::Display for Action {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Action::Buy => write!(f, "buy"),
            Action::Sell => write!(f, "sell"),
        }
    }
}

// ---------------------------------------------------------------------------
// Belief
// ---------------------------------------------------------------------------

/// A probability vector over the `X` states.
#[derive(Debug, Clone, PartialEq)]
pub struct Belief(DVector<f64>);

impl Belief {
    /// Validates with the default tolerance [`PROB_TOL`].
    pub fn new(values: Vec<f64>) -> Result<Self> {
        Self::with_tolerance(values, PROB_TOL)
    }

    pub fn with_tolerance(values: Vec<f64>, tol: f64) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::InvalidBelief("empty vector".into()));
        }
        for (i, &v) in values.iter().enumerate() {
            if !v.is_finite() || v < 0.0 {
                return Err(Error::InvalidBelief(format!(
                    "entry {} is {v}, expected a nonnegative number",
                    i + 1
                )));
            }
        }
        let sum: f64 = values.iter().sum();
        if (sum - 1.0).abs() > tol {
            return Err(Error::InvalidBelief(format!(
                "entries sum to {sum}, expected 1"
            )));
        }
        Ok(Belief(DVector::from_vec(values)))
    }

    /// Unit vector on `state` (0-based).
    pub fn point_mass(states: usize, state: usize) -> Self {
        let mut v = DVector::zeros(states);
        v[state] = 1.0;
        Belief(v)
    }

    /// Two-state belief `[1 - p2, p2]`, where `p2` is the probability of
    /// the pre-change state.
    pub fn from_pi2(p2: f64) -> Self {
        let p2 = p2.clamp(0.0, 1.0);
        Belief(DVector::from_vec(vec![1.0 - p2, p2]))
    }

    /// Normalizes a nonnegative vector; `None` if its mass is zero.
    pub(crate) fn normalized(v: DVector<f64>) -> Option<Self> {
        let s = v.sum();
        if s > 0.0 && s.is_finite() {
            Some(Belief(v / s))
        } else {
            None
        }
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        self.0.as_slice()
    }

    pub fn vector(&self) -> &DVector<f64> {
        &self.0
    }

    pub fn get(&self, state: usize) -> f64 {
        self.0[state]
    }

    /// Probability of the pre-change state in a two-state model.
    pub fn pi2(&self) -> f64 {
        self.0[1]
    }
}

// ---------------------------------------------------------------------------
// AgentModel
// ---------------------------------------------------------------------------

/// Parameters shared by every trading agent.
#[derive(Debug, Clone, PartialEq)]
pub struct AgentModel {
    b: DMatrix<f64>,
    p: DMatrix<f64>,
    c: DMatrix<f64>,
    alpha: f64,
}

impl AgentModel {
    /// `b` is `X x Y` (row x gives P(y | x)), `p` is `X x X`, `c` is `X x 2`.
    pub fn new(b: DMatrix<f64>, p: DMatrix<f64>, c: DMatrix<f64>, alpha: f64) -> Result<Self> {
        Self::new_with_tolerance(b, p, c, alpha, PROB_TOL)
    }

    pub fn new_with_tolerance(
        b: DMatrix<f64>,
        p: DMatrix<f64>,
        c: DMatrix<f64>,
        alpha: f64,
        tol: f64,
    ) -> Result<Self> {
        let x = p.nrows();
        if x < 2 {
            return Err(Error::model("model.P", "need at least two states"));
        }
        if p.ncols() != x {
            return Err(Error::model(
                "model.P",
                format!("expected {x} x {x}, got {} x {}", p.nrows(), p.ncols()),
            ));
        }
        if b.nrows() != x {
            return Err(Error::model(
                "model.B",
                format!("expected {x} rows, got {}", b.nrows()),
            ));
        }
        if b.ncols() == 0 {
            return Err(Error::model("model.B", "need at least one observation"));
        }
        if c.nrows() != x || c.ncols() != 2 {
            return Err(Error::model(
                "model.c",
                format!("expected {x} x 2, got {} x {}", c.nrows(), c.ncols()),
            ));
        }
        check_stochastic("model.B", &b, tol)?;
        check_stochastic("model.P", &p, tol)?;
        if (p[(0, 0)] - 1.0).abs() > tol || (1..x).any(|j| p[(0, j)].abs() > tol) {
            return Err(Error::model(
                "model.P[1]",
                "state 1 must be absorbing (row must equal e_1)",
            ));
        }
        for i in 0..x {
            for j in 0..2 {
                if !c[(i, j)].is_finite() {
                    return Err(Error::model(
                        format!("model.c[{}]", i + 1),
                        "costs must be finite",
                    ));
                }
            }
        }
        check_alpha(alpha)?;
        Ok(AgentModel { b, p, c, alpha })
    }

    /// Builds a model from row-major nested vectors.
    pub fn from_rows(b: &[Vec<f64>], p: &[Vec<f64>], c: &[Vec<f64>], alpha: f64) -> Result<Self> {
        Self::new(
            matrix_from_rows("model.B", b)?,
            matrix_from_rows("model.P", p)?,
            matrix_from_rows("model.c", c)?,
            alpha,
        )
    }

    /// Same matrices, different risk-aversion factor.
    pub fn with_alpha(&self, alpha: f64) -> Result<Self> {
        check_alpha(alpha)?;
        Ok(AgentModel {
            alpha,
            ..self.clone()
        })
    }

    pub fn states(&self) -> usize {
        self.p.nrows()
    }

    pub fn observations(&self) -> usize {
        self.b.ncols()
    }

    pub fn observation_matrix(&self) -> &DMatrix<f64> {
        &self.b
    }

    pub fn transition_matrix(&self) -> &DMatrix<f64> {
        &self.p
    }

    pub fn cost_matrix(&self) -> &DMatrix<f64> {
        &self.c
    }

    pub fn cost(&self, state: usize, action: Action) -> f64 {
        self.c[(state, action.index())]
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    /// One-step prediction `P' pi`.
    pub fn predict(&self, pi: &Belief) -> DVector<f64> {
        self.p.tr_mul(pi.vector())
    }

    pub(crate) fn check_belief(&self, pi: &Belief) -> Result<()> {
        if pi.len() != self.states() {
            return Err(Error::DimensionMismatch {
                expected: self.states(),
                found: pi.len(),
            });
        }
        Ok(())
    }

    pub(crate) fn check_observation(&self, y: usize) -> Result<()> {
        if y >= self.observations() {
            return Err(Error::IndexOutOfRange {
                kind: "observation",
                index: y,
                size: self.observations(),
            });
        }
        Ok(())
    }
}

pub(crate) fn check_alpha(alpha: f64) -> Result<()> {
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(Error::InvalidAlpha(alpha));
    }
    Ok(())
}

fn check_stochastic(name: &str, m: &DMatrix<f64>, tol: f64) -> Result<()> {
    for (i, row) in m.row_iter().enumerate() {
        let path = format!("{name}[{}]", i + 1);
        for &v in row.iter() {
            if !v.is_finite() || v < -tol || v > 1.0 + tol {
                return Err(Error::model(path, format!("entry {v} outside [0, 1]")));
            }
        }
        let sum = row.sum();
        if (sum - 1.0).abs() > tol {
            return Err(Error::model(path, format!("row sums to {sum}, expected 1")));
        }
    }
    Ok(())
}

pub(crate) fn matrix_from_rows(name: &str, rows: &[Vec<f64>]) -> Result<DMatrix<f64>> {
    let ncols = rows.first().map_or(0, Vec::len);
    if rows.is_empty() || ncols == 0 {
        return Err(Error::model(name, "matrix is empty"));
    }
    for (i, r) in rows.iter().enumerate() {
        if r.len() != ncols {
            return Err(Error::model(
                format!("{name}[{}]", i + 1),
                format!("expected {ncols} columns, got {}", r.len()),
            ));
        }
    }
    Ok(DMatrix::from_fn(rows.len(), ncols, |i, j| rows[i][j]))
}

// ---------------------------------------------------------------------------
// Assumption checks
// ---------------------------------------------------------------------------

/// Which structural assumptions a model satisfies.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssumptionReport {
    pub b_is_tp2: bool,
    pub p_is_tp2: bool,
    /// `c(x,2) - c(x,1) <= c(x+1,2) - c(x+1,1)` for all x.
    pub c_submodular_literal: bool,
    /// The reversed inequality. The monotone-decision results need this
    /// orientation given the state ordering used here.
    pub c_submodular_reversed: bool,
    /// Smallest `1 - eta_y(X)` over the scanned (belief, observation) pairs.
    pub alpha_condition_min: f64,
    /// Largest `1 - eta_y(X)` over the same scan; `alpha` at or above this
    /// satisfies the alpha condition everywhere on the scan.
    pub alpha_condition_max: f64,
}

impl AssumptionReport {
    /// TP2 `B` and `P` together with the reversed submodularity of `c`.
    pub fn certified(&self) -> bool {
        self.b_is_tp2 && self.p_is_tp2 && self.c_submodular_reversed
    }
}

/// All second-order minors nonnegative (within `tol`).
pub fn is_tp2(m: &DMatrix<f64>, tol: f64) -> bool {
    let (r, c) = m.shape();
    for i in 0..r {
        for j in (i + 1)..r {
            for k in 0..c {
                for l in (k + 1)..c {
                    if m[(i, k)] * m[(j, l)] - m[(i, l)] * m[(j, k)] < -tol {
                        return false;
                    }
                }
            }
        }
    }
    true
}

fn cost_gaps(c: &DMatrix<f64>) -> Vec<f64> {
    (0..c.nrows()).map(|x| c[(x, 1)] - c[(x, 0)]).collect()
}

pub fn is_submodular_literal(c: &DMatrix<f64>, tol: f64) -> bool {
    cost_gaps(c).windows(2).all(|w| w[0] <= w[1] + tol)
}

pub fn is_submodular_reversed(c: &DMatrix<f64>, tol: f64) -> bool {
    cost_gaps(c).windows(2).all(|w| w[0] + tol >= w[1])
}

/// Beliefs used for the alpha-condition scan: 101 points for two states,
/// a simplex lattice otherwise.
pub(crate) fn scan_beliefs(states: usize) -> Vec<Belief> {
    let resolution = match states {
        2 => 100,
        3 => 30,
        4 => 12,
        _ => 6,
    };
    simplex_lattice(states, resolution)
}

/// All beliefs with entries in `{0, 1/r, ..., 1}`.
pub fn simplex_lattice(states: usize, resolution: usize) -> Vec<Belief> {
    fn rec(remaining: usize, slots: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if slots == 1 {
            cur.push(remaining);
            out.push(cur.clone());
            cur.pop();
            return;
        }
        for k in 0..=remaining {
            cur.push(k);
            rec(remaining - k, slots - 1, cur, out);
            cur.pop();
        }
    }
    let mut counts = Vec::new();
    rec(
        resolution,
        states,
        &mut Vec::with_capacity(states),
        &mut counts,
    );
    let r = resolution as f64;
    counts
        .into_iter()
        .map(|c| {
            Belief(DVector::from_iterator(
                states,
                c.into_iter().map(|k| k as f64 / r),
            ))
        })
        .collect()
}

/// Checks the TP2 conditions, submodularity in both orientations, and scans
/// the alpha condition.
/// Never rejects a model: failing an assumption only means the structural
/// results are not certified.
pub fn validate_model(model: &AgentModel) -> AssumptionReport {
    let tol = PROB_TOL;
    let last = model.states() - 1;
    let mut min = f64::INFINITY;
    let mut max = f64::NEG_INFINITY;
    for pi in scan_beliefs(model.states()) {
        for y in 0..model.observations() {
            if let Ok(eta) = crate::social::private_update(model, &pi, y) {
                let v = 1.0 - eta.get(last);
                min = min.min(v);
                max = max.max(v);
            }
        }
    }
    AssumptionReport {
        b_is_tp2: is_tp2(model.observation_matrix(), tol),
        p_is_tp2: is_tp2(model.transition_matrix(), tol),
        c_submodular_literal: is_submodular_literal(model.cost_matrix(), tol),
        c_submodular_reversed: is_submodular_reversed(model.cost_matrix(), tol),
        alpha_condition_min: min,
        alpha_condition_max: max,
    }
}

// ---------------------------------------------------------------------------
// Stochastic orders
// ---------------------------------------------------------------------------

/// Result of comparing two beliefs under a partial order. `Leq` means the
/// first argument is dominated by the second.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum StochasticOrder {
    Equal,
    Leq,
    Geq,
    Incomparable,
}

impl StochasticOrder {
    fn from_flags(leq: bool, geq: bool) -> Self {
        match (leq, geq) {
            (true, true) => StochasticOrder::Equal,
            (true, false) => StochasticOrder::Leq,
            (false, true) => StochasticOrder::Geq,
            (false, false) => StochasticOrder::Incomparable,
        }
    }
}

fn check_same_len(p1: &Belief, p2: &Belief) -> Result<()> {
    if p1.len() != p2.len() {
        return Err(Error::DimensionMismatch {
            expected: p1.len(),
            found: p2.len(),
        });
    }
    Ok(())
}

/// Monotone likelihood ratio comparison. `hi` MLR-dominates `lo` when
/// `hi(i) lo(j) <= lo(i) hi(j)` for all `i < j`.
pub fn mlr_compare(p1: &Belief, p2: &Belief) -> Result<StochasticOrder> {
    mlr_compare_with_tol(p1, p2, PROB_TOL)
}

pub fn mlr_compare_with_tol(p1: &Belief, p2: &Belief, tol: f64) -> Result<StochasticOrder> {
    check_same_len(p1, p2)?;
    let dominates = |hi: &Belief, lo: &Belief| {
        let n = hi.len();
        (0..n).all(|i| ((i + 1)..n).all(|j| hi.get(i) * lo.get(j) <= lo.get(i) * hi.get(j) + tol))
    };
    Ok(StochasticOrder::from_flags(
        dominates(p2, p1),
        dominates(p1, p2),
    ))
}

/// First-order stochastic dominance via upper-tail sums.
pub fn fosd_compare(p1: &Belief, p2: &Belief) -> Result<StochasticOrder> {
    fosd_compare_with_tol(p1, p2, PROB_TOL)
}

pub fn fosd_compare_with_tol(p1: &Belief, p2: &Belief, tol: f64) -> Result<StochasticOrder> {
    check_same_len(p1, p2)?;
    let n = p1.len();
    let (mut t1, mut t2) = (0.0, 0.0);
    let (mut leq, mut geq) = (true, true);
    for i in (0..n).rev() {
        t1 += p1.get(i);
        t2 += p2.get(i);
        leq &= t1 <= t2 + tol;
        geq &= t1 + tol >= t2;
    }
    Ok(StochasticOrder::from_flags(leq, geq))
}
