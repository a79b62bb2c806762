//! JSON experiment configuration.
//!
//! ```json
//! {
//!   "model":    { "X": 2, "Y": 2, "B": [[0.7,0.3],[0.3,0.7]],
//!                 "P": [[1,0],[0.04,0.96]], "c": [[0.5,1],[1,0.5]], "alpha": 0.45 },
//!   "observer": { "f": [0, 2], "d": 0.8, "rho": 0.9 },
//!   "solver":   { "grid_points": 2001, "tol": 1e-9, "max_iter": 100000 },
//!   "sim":      { "replicates": 1000, "horizon": 1000, "seed": 0, "pi0": [0.1, 0.9] },
//!   "paths":    { "input": "actions.csv", "output": "out" }
//! }
//! ```
//!
//! Only `model` is required. Unknown keys are rejected. When `observer.rho`
//! is omitted the solver horizon must be set, and the problem is solved
//! undiscounted by backward induction.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::detector::{ObserverModel, SolverConfig};
use crate::error::{Error, Result};
use crate::model::{matrix_from_rows, AgentModel, Belief};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelBlock {
    #[serde(rename = "X")]
    pub states: usize,
    #[serde(rename = "Y")]
    pub observations: usize,
    #[serde(rename = "B")]
    pub b: Vec<Vec<f64>>,
    #[serde(rename = "P")]
    pub p: Vec<Vec<f64>>,
    pub c: Vec<Vec<f64>>,
    pub alpha: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObserverBlock {
    pub f: Vec<f64>,
    pub d: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rho: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimBlock {
    pub replicates: usize,
    pub horizon: usize,
    pub seed: u64,
    pub pi0: Vec<f64>,
}

impl Default for SimBlock {
    fn default() -> Self {
        SimBlock {
            replicates: 1000,
            horizon: 1000,
            seed: 0,
            pi0: vec![0.1, 0.9],
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PathsBlock {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub input: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub model: ModelBlock,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub observer: Option<ObserverBlock>,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default)]
    pub sim: SimBlock,
    #[serde(default)]
    pub paths: PathsBlock,
}

impl ExperimentConfig {
    pub fn agent_model(&self) -> Result<AgentModel> {
        let m = &self.model;
        let b = matrix_from_rows("model.B", &m.b)?;
        let p = matrix_from_rows("model.P", &m.p)?;
        let c = matrix_from_rows("model.c", &m.c)?;
        if m.states < 2 {
            return Err(Error::config("model.X", "need at least two states"));
        }
        if m.observations < 1 {
            return Err(Error::config("model.Y", "need at least one observation"));
        }
        let dims = [
            ("model.B", b.shape(), (m.states, m.observations)),
            ("model.P", p.shape(), (m.states, m.states)),
            ("model.c", c.shape(), (m.states, 2)),
        ];
        for (path, got, want) in dims {
            if got != want {
                return Err(Error::config(
                    path,
                    format!(
                        "expected {} x {}, got {} x {}",
                        want.0, want.1, got.0, got.1
                    ),
                ));
            }
        }
        AgentModel::new(b, p, c, m.alpha)
    }

    /// Observer model with the discount resolved: omitted `rho` means 1,
    /// which is only valid together with a solver horizon.
    pub fn observer_model(&self) -> Result<Option<ObserverModel>> {
        let Some(o) = &self.observer else {
            return Ok(None);
        };
        let rho = match (o.rho, self.solver.horizon) {
            (Some(r), _) => r,
            (None, Some(_)) => 1.0,
            (None, None) => {
                return Err(Error::config(
                    "observer.rho",
                    "missing discount; set rho or a solver horizon",
                ))
            }
        };
        if o.f.len() != self.model.states {
            return Err(Error::config(
                "observer.f",
                format!("expected {} weights, got {}", self.model.states, o.f.len()),
            ));
        }
        ObserverModel::new(o.f.clone(), o.d, rho).map(Some)
    }

    pub fn require_observer(&self) -> Result<ObserverModel> {
        self.observer_model()?
            .ok_or_else(|| Error::config("observer", "missing observer block"))
    }

    pub fn pi0(&self) -> Result<Belief> {
        if self.sim.pi0.len() != self.model.states {
            return Err(Error::config(
                "sim.pi0",
                format!(
                    "expected {} entries, got {}",
                    self.model.states,
                    self.sim.pi0.len()
                ),
            ));
        }
        Belief::new(self.sim.pi0.clone()).map_err(|e| Error::config("sim.pi0", e.to_string()))
    }

    fn validate(&self) -> Result<()> {
        self.agent_model()?;
        self.observer_model()?;
        self.pi0()?;
        let s = &self.solver;
        if s.grid_points < 2 {
            return Err(Error::config("solver.grid_points", "must be at least 2"));
        }
        if s.tol.is_nan() || s.tol <= 0.0 {
            return Err(Error::config("solver.tol", "must be positive"));
        }
        if s.max_iter == 0 {
            return Err(Error::config("solver.max_iter", "must be at least 1"));
        }
        if s.horizon == Some(0) {
            return Err(Error::config("solver.horizon", "must be at least 1"));
        }
        if self.sim.replicates == 0 {
            return Err(Error::config("sim.replicates", "must be at least 1"));
        }
        if self.sim.horizon == 0 {
            return Err(Error::config("sim.horizon", "must be at least 1"));
        }
        Ok(())
    }

    /// Pretty-printed JSON with all defaults filled in.
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config is always serializable")
    }
}

/// Parses and fully validates a configuration document.
pub fn parse_config(text: &str) -> Result<ExperimentConfig> {
    let de = &mut serde_json::Deserializer::from_str(text);
    let config: ExperimentConfig = serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        Error::config(
            if path == "." {
                "config".to_string()
            } else {
                path
            },
            e.into_inner().to_string(),
        )
    })?;
    config.validate()?;
    Ok(config)
}
