//! Agent-based market simulation, Monte Carlo detection metrics and replay
//! of recorded action sequences.
//!
//! Each step runs in a fixed order: state transition, private observation,
//! agent action, public belief update, observer decision.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::changepoint::draw_index;
use crate::detector::{ObserverAction, ObserverModel, SolvedPolicy};
use crate::error::{Error, Result};
use crate::model::{Action, AgentModel, Belief};
use crate::social::{agent_decision, public_update};

/// Anything that maps a public belief to a stop/continue decision.
pub trait StoppingRule: Sync {
    fn decide(&self, pi: &Belief) -> ObserverAction;

    /// Rejects rules built for a different model.
    fn check_compatible(&self, _model: &AgentModel, _obs: &ObserverModel) -> Result<()> {
        Ok(())
    }
}

impl StoppingRule for SolvedPolicy {
    fn decide(&self, pi: &Belief) -> ObserverAction {
        self.action_at(pi.pi2())
    }

    fn check_compatible(&self, model: &AgentModel, obs: &ObserverModel) -> Result<()> {
        if self.model() != model {
            return Err(Error::PolicyMismatch(
                "policy was solved for a different agent model".into(),
            ));
        }
        if self.observer() != obs {
            return Err(Error::PolicyMismatch(
                "policy was solved for a different observer".into(),
            ));
        }
        Ok(())
    }
}

/// Takes the same action at every belief.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FixedRule(pub ObserverAction);

impl StoppingRule for FixedRule {
    fn decide(&self, _pi: &Belief) -> ObserverAction {
        self.0
    }
}

/// One simulated time step (`t >= 1`).
#[derive(Debug, Clone, PartialEq)]
pub struct Step {
    pub t: usize,
    /// 0-based state.
    pub x: usize,
    /// 0-based observation.
    pub y: usize,
    pub a: Action,
    /// Public belief after the update with `a`.
    pub pi: Belief,
    pub u: ObserverAction,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub x0: usize,
    pub pi0: Belief,
    pub steps: Vec<Step>,
    /// First time in state 0, if reached before the episode ended.
    pub tau0: Option<usize>,
    /// Stop time, `None` if the horizon was reached.
    pub tau: Option<usize>,
}

impl Trajectory {
    pub fn actions(&self) -> Vec<Action> {
        self.steps.iter().map(|s| s.a).collect()
    }

    pub fn false_alarm(&self) -> bool {
        match (self.tau, self.tau0) {
            (Some(t), Some(t0)) => t < t0,
            (Some(_), None) => true,
            _ => false,
        }
    }

    /// Discounted realized cost using the belief-based stage costs.
    pub fn discounted_cost(&self, obs: &ObserverModel) -> f64 {
        let rho = obs.discount();
        let f = obs.false_alarm_weights();
        let mut cost = 0.0;
        let mut weight = 1.0;
        for s in &self.steps {
            let pi = s.pi.as_slice();
            cost += weight
                * match s.u {
                    ObserverAction::Stop => f.iter().zip(pi).map(|(a, b)| a * b).sum::<f64>(),
                    ObserverAction::Continue => obs.delay_cost() * pi[0],
                };
            weight *= rho;
        }
        cost
    }
}

/// Runs one episode of at most `horizon` steps.
pub fn simulate_episode<S: StoppingRule + ?Sized>(
    model: &AgentModel,
    obs: &ObserverModel,
    rule: &S,
    pi0: &Belief,
    horizon: usize,
    seed: u64,
) -> Result<Trajectory> {
    model.check_belief(pi0)?;
    rule.check_compatible(model, obs)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let b = model.observation_matrix();
    let p = model.transition_matrix();

    let x0 = draw_index(&mut rng, pi0.as_slice().iter().copied());
    let mut x = x0;
    let mut tau0 = (x == 0).then_some(0);
    let mut pi = pi0.clone();
    let mut steps = Vec::new();
    let mut tau = None;
    for t in 1..=horizon {
        x = draw_index(&mut rng, p.row(x).iter().copied());
        if x == 0 && tau0.is_none() {
            tau0 = Some(t);
        }
        let y = draw_index(&mut rng, b.row(x).iter().copied());
        let a = agent_decision(model, &pi, y)?;
        pi = public_update(model, &pi, a)?.belief;
        let u = rule.decide(&pi);
        steps.push(Step {
            t,
            x,
            y,
            a,
            pi: pi.clone(),
            u,
        });
        if u == ObserverAction::Stop {
            tau = Some(t);
            break;
        }
    }
    Ok(Trajectory {
        x0,
        pi0: pi0.clone(),
        steps,
        tau0,
        tau,
    })
}

/// Replicate seed: the splitmix64 output for state `base` and counter `index + 1`.
///
/// ```text
/// z = base + (index + 1) * 0x9E3779B97F4A7C15          (wrapping)
/// z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9
/// z = (z ^ (z >> 27)) * 0x94D049BB133111EB
/// seed = z ^ (z >> 31)
/// ```
pub fn derive_seed(base: u64, index: u64) -> u64 {
    let mut z = base.wrapping_add(index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Sample mean with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub mean: f64,
    pub std_error: f64,
    pub samples: usize,
}

impl Estimate {
    fn from_samples(xs: &[f64]) -> Self {
        let n = xs.len();
        if n == 0 {
            return Estimate {
                mean: f64::NAN,
                std_error: f64::NAN,
                samples: 0,
            };
        }
        let mean = xs.iter().sum::<f64>() / n as f64;
        let std_error = if n > 1 {
            let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
            (var / n as f64).sqrt()
        } else {
            0.0
        };
        Estimate {
            mean,
            std_error,
            samples: n,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectionMetrics {
    pub replicates: usize,
    /// Fraction of episodes stopped before the change.
    pub false_alarm_rate: Estimate,
    /// `tau - tau0` over episodes stopped at or after the change.
    pub detection_delay: Estimate,
    /// Discounted cost per episode.
    pub discounted_cost: Estimate,
    /// Episodes that hit the horizon without stopping.
    pub censored: usize,
    /// `horizon - tau0` over censored episodes in which the change happened.
    pub censored_delay: Estimate,
}

/// Aggregates `replicates` episodes seeded by [`derive_seed`]. Episodes run
/// in parallel; aggregation follows replicate order.
pub fn monte_carlo<S: StoppingRule + ?Sized>(
    model: &AgentModel,
    obs: &ObserverModel,
    rule: &S,
    pi0: &Belief,
    replicates: usize,
    horizon: usize,
    seed: u64,
) -> Result<DetectionMetrics> {
    if replicates == 0 {
        return Err(Error::InvalidSolverConfig(
            "replicates must be at least 1".into(),
        ));
    }
    rule.check_compatible(model, obs)?;
    let episodes: Vec<Trajectory> = (0..replicates as u64)
        .into_par_iter()
        .map(|i| simulate_episode(model, obs, rule, pi0, horizon, derive_seed(seed, i)))
        .collect::<Result<_>>()?;

    let mut alarms = Vec::with_capacity(replicates);
    let mut delays = Vec::new();
    let mut costs = Vec::with_capacity(replicates);
    let mut censored_delays = Vec::new();
    let mut censored = 0;
    for e in &episodes {
        alarms.push(if e.false_alarm() { 1.0 } else { 0.0 });
        costs.push(e.discounted_cost(obs));
        match (e.tau, e.tau0) {
            (Some(t), Some(t0)) if t >= t0 => delays.push((t - t0) as f64),
            (None, t0) => {
                censored += 1;
                if let Some(t0) = t0 {
                    censored_delays.push((horizon - t0) as f64);
                }
            }
            _ => {}
        }
    }
    Ok(DetectionMetrics {
        replicates,
        false_alarm_rate: Estimate::from_samples(&alarms),
        detection_delay: Estimate::from_samples(&delays),
        discounted_cost: Estimate::from_samples(&costs),
        censored,
        censored_delay: Estimate::from_samples(&censored_delays),
    })
}

/// Belief path and observer decisions along a recorded action sequence.
#[derive(Debug, Clone, PartialEq)]
pub struct ReplayResult {
    /// `pi_0 ..= pi_n`.
    pub beliefs: Vec<Belief>,
    /// Observer decision after each action (`decisions[k-1]` at `pi_k`).
    pub decisions: Vec<ObserverAction>,
    /// First step (1-based) at which the rule says stop.
    pub tau: Option<usize>,
}

/// Runs the public filter over `actions` and applies `rule` at each step.
pub fn replay<S: StoppingRule + ?Sized>(
    model: &AgentModel,
    rule: &S,
    pi0: &Belief,
    actions: &[Action],
) -> Result<ReplayResult> {
    model.check_belief(pi0)?;
    let mut beliefs = Vec::with_capacity(actions.len() + 1);
    let mut decisions = Vec::with_capacity(actions.len());
    beliefs.push(pi0.clone());
    let mut tau = None;
    for (k, &a) in actions.iter().enumerate() {
        let prev = beliefs.last().expect("starts with pi0");
        let next = match public_update(model, prev, a) {
            Ok(u) => u.belief,
            Err(Error::ImpossibleAction { .. }) => {
                return Err(Error::Replay {
                    step: k + 1,
                    action: a.code(),
                })
            }
            Err(e) => return Err(e),
        };
        let u = rule.decide(&next);
        if u == ObserverAction::Stop && tau.is_none() {
            tau = Some(k + 1);
        }
        decisions.push(u);
        beliefs.push(next);
    }
    Ok(ReplayResult {
        beliefs,
        decisions,
        tau,
    })
}
