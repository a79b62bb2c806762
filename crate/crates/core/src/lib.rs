//! Risk-averse social learning and quickest change detection.
//!
//! Agents observe a private noisy signal of a hidden Markov state, update a
//! private belief, and trade (buy or sell) to minimize the conditional
//! value-at-risk of their cost. A market observer sees only the trades,
//! maintains the public belief through the social learning filter, and
//! decides when to declare that the absorbing post-change state has been
//! reached.
//!
//! See [`model`] for index conventions.

pub mod changepoint;
pub mod config;
pub mod detector;
pub mod error;
pub mod io;
pub mod model;
pub mod reproduce;
pub mod risk;
pub mod sim;
pub mod social;

pub use changepoint::{
    expected_change_time, ph_pmf, ph_pmf_series, sample_chain, ChainSample, ChangeProcess,
};
pub use config::{parse_config, ExperimentConfig};
pub use detector::{
    observer_cost, solve, stopping_set_analysis, value_discontinuities, ObserverAction,
    ObserverModel, SolvedPolicy, SolverConfig, StoppingSetReport, ValueJump,
};
pub use error::{Error, Result};
pub use model::{
    fosd_compare, mlr_compare, validate_model, Action, AgentModel, AssumptionReport, Belief,
    StochasticOrder, PROB_TOL,
};
pub use reproduce::{run_reproduce, ReproduceSummary, Target};
pub use risk::{cvar_discrete, risk_adjusted_cost, Cvar, DiscreteCostDistribution};
pub use sim::{
    derive_seed, monte_carlo, replay, simulate_episode, DetectionMetrics, Estimate, FixedRule,
    ReplayResult, StoppingRule, Trajectory,
};
pub use social::{
    agent_decision, decision_profile, learning_region_sweep, partition_scan, private_update,
    public_update, DecisionProfile, PublicUpdate, RegionInterval, RegionRow, RegionTable,
};
