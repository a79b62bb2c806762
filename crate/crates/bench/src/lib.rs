//! Shared fixtures for the benchmarks.

use herdwatch_core::{AgentModel, Belief, DiscreteCostDistribution, ObserverModel, Target};

/// Agent and observer models of a built-in dataset experiment.
pub fn dataset(target: Target) -> (AgentModel, ObserverModel) {
    let cfg = target.config();
    let model = cfg.agent_model().expect("built-in model");
    let obs = cfg.require_observer().expect("built-in observer");
    (model, obs)
}

/// Deterministic cost distribution with `n` distinct atoms.
pub fn spread_distribution(n: usize) -> DiscreteCostDistribution {
    let weights: Vec<f64> = (1..=n).map(|i| (i % 7 + 1) as f64).collect();
    let total: f64 = weights.iter().sum();
    let atoms = weights
        .iter()
        .enumerate()
        .map(|(i, w)| (((i * 37) % n) as f64 * 0.5 - 3.0, w / total))
        .collect();
    DiscreteCostDistribution::new(atoms).expect("valid distribution")
}

/// `n` evenly spaced two-state beliefs.
pub fn belief_grid(n: usize) -> Vec<Belief> {
    (0..n)
        .map(|i| Belief::from_pi2(i as f64 / (n - 1) as f64))
        .collect()
}
