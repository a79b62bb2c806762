//! Change time of the absorbing state chain.
//!
//! With state 0 absorbing, the change time `tau0 = inf{k : x_k = 0}` has a
//! discrete phase-type distribution built from the transient block of `P`
//! and its exit column.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::model::{AgentModel, Belief, PROB_TOL};

/// Initial distribution plus transition matrix with absorbing state 0.
#[derive(Debug, Clone, PartialEq)]
pub struct ChangeProcess {
    pi0: Belief,
    p: DMatrix<f64>,
}

impl ChangeProcess {
    pub fn new(pi0: Belief, p: DMatrix<f64>) -> Result<Self> {
        let x = p.nrows();
        if p.ncols() != x || x < 2 {
            return Err(Error::model(
                "P",
                "transition matrix must be square with at least two states",
            ));
        }
        if pi0.len() != x {
            return Err(Error::DimensionMismatch {
                expected: x,
                found: pi0.len(),
            });
        }
        for (i, row) in p.row_iter().enumerate() {
            if row.iter().any(|&v| !(0.0..=1.0 + PROB_TOL).contains(&v))
                || (row.sum() - 1.0).abs() > PROB_TOL
            {
                return Err(Error::model(
                    format!("P[{}]", i + 1),
                    "row is not a probability vector",
                ));
            }
        }
        if p[(0, 0)] != 1.0 {
            return Err(Error::model("P[1]", "state 1 must be absorbing"));
        }
        Ok(ChangeProcess { pi0, p })
    }

    pub fn from_model(model: &AgentModel, pi0: Belief) -> Result<Self> {
        Self::new(pi0, model.transition_matrix().clone())
    }

    /// Two-state chain leaving the pre-change state with probability `exit`.
    pub fn geometric(exit: f64, pi0: Belief) -> Result<Self> {
        Self::new(
            pi0,
            DMatrix::from_row_slice(2, 2, &[1.0, 0.0, exit, 1.0 - exit]),
        )
    }

    pub fn pi0(&self) -> &Belief {
        &self.pi0
    }

    pub fn transition_matrix(&self) -> &DMatrix<f64> {
        &self.p
    }

    fn transient_block(&self) -> DMatrix<f64> {
        let n = self.p.nrows() - 1;
        self.p.view((1, 1), (n, n)).into_owned()
    }

    fn exit_column(&self) -> DVector<f64> {
        let n = self.p.nrows() - 1;
        self.p.view((1, 0), (n, 1)).column(0).into_owned()
    }

    fn transient_start(&self) -> DVector<f64> {
        DVector::from_iterator(self.p.nrows() - 1, self.pi0.as_slice()[1..].iter().copied())
    }
}

/// `P(tau0 = k)`.
pub fn ph_pmf(process: &ChangeProcess, k: usize) -> f64 {
    if k == 0 {
        return process.pi0.get(0);
    }
    let block = process.transient_block();
    let mut mass = process.transient_start();
    for _ in 1..k {
        mass = block.tr_mul(&mass);
    }
    mass.dot(&process.exit_column())
}

/// `P(tau0 = k)` for `k = 0..=max_k`.
pub fn ph_pmf_series(process: &ChangeProcess, max_k: usize) -> Vec<f64> {
    let block = process.transient_block();
    let exit = process.exit_column();
    let mut mass = process.transient_start();
    let mut out = Vec::with_capacity(max_k + 1);
    out.push(process.pi0.get(0));
    for k in 1..=max_k {
        if k > 1 {
            mass = block.tr_mul(&mass);
        }
        out.push(mass.dot(&exit));
    }
    out
}

/// Transient states reachable from the initial distribution (0-based
/// indices into the transient block).
fn reachable_transient(process: &ChangeProcess) -> Vec<usize> {
    let block = process.transient_block();
    let n = block.nrows();
    let start = process.transient_start();
    let mut seen = vec![false; n];
    let mut stack: Vec<usize> = (0..n).filter(|&i| start[i] > 0.0).collect();
    for &i in &stack {
        seen[i] = true;
    }
    while let Some(i) = stack.pop() {
        for j in 0..n {
            if !seen[j] && block[(i, j)] > 0.0 {
                seen[j] = true;
                stack.push(j);
            }
        }
    }
    (0..n).filter(|&i| seen[i]).collect()
}

/// `E[tau0]`, computed as `pi0_T' (I - P_T)^{-1} 1` over the reachable
/// transient states.
pub fn expected_change_time(process: &ChangeProcess) -> Result<f64> {
    let block = process.transient_block();
    let exit = process.exit_column();
    let reach = reachable_transient(process);
    if reach.is_empty() {
        return Ok(0.0);
    }

    // Backward reachability of the absorbing state.
    let n = block.nrows();
    let mut leads_out: Vec<bool> = (0..n).map(|i| exit[i] > 0.0).collect();
    loop {
        let mut changed = false;
        for i in 0..n {
            if !leads_out[i] && (0..n).any(|j| leads_out[j] && block[(i, j)] > 0.0) {
                leads_out[i] = true;
                changed = true;
            }
        }
        if !changed {
            break;
        }
    }
    if let Some(&stuck) = reach.iter().find(|&&i| !leads_out[i]) {
        return Err(Error::NonAbsorbing(format!(
            "state {} is reachable but never reaches state 1",
            stuck + 2
        )));
    }

    let m = reach.len();
    let system = DMatrix::from_fn(m, m, |a, b| {
        let delta = if a == b { 1.0 } else { 0.0 };
        delta - block[(reach[a], reach[b])]
    });
    let ones = DVector::from_element(m, 1.0);
    let steps = system
        .lu()
        .solve(&ones)
        .ok_or_else(|| Error::NonAbsorbing("transient block is singular".into()))?;
    let start = process.transient_start();
    Ok(reach
        .iter()
        .enumerate()
        .map(|(a, &i)| start[i] * steps[a])
        .sum())
}

/// Draws an index from nonnegative weights summing to one by inverse CDF.
pub(crate) fn draw_index<R: Rng>(rng: &mut R, weights: impl IntoIterator<Item = f64>) -> usize {
    let u: f64 = rng.random();
    let mut cumulative = 0.0;
    let mut last_positive = 0;
    for (i, w) in weights.into_iter().enumerate() {
        if w > 0.0 {
            last_positive = i;
            cumulative += w;
            if u < cumulative {
                return i;
            }
        }
    }
    last_positive
}

/// A sampled state path.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ChainSample {
    /// `x_0 ..= x_horizon`, 0-based states.
    pub states: Vec<usize>,
    /// First index with state 0, `None` if not absorbed by the horizon.
    pub tau0: Option<usize>,
}

/// Samples `x_0 ..= x_horizon` with a generator seeded from `seed`.
/// After absorption the remaining path is filled without further draws.
pub fn sample_chain(process: &ChangeProcess, horizon: usize, seed: u64) -> ChainSample {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut states = Vec::with_capacity(horizon + 1);
    let mut x = draw_index(&mut rng, process.pi0.as_slice().iter().copied());
    states.push(x);
    let mut tau0 = (x == 0).then_some(0);
    for k in 1..=horizon {
        if x != 0 {
            x = draw_index(&mut rng, process.p.row(x).iter().copied());
            if x == 0 {
                tau0 = Some(k);
            }
        }
        states.push(x);
    }
    ChainSample { states, tau0 }
}
