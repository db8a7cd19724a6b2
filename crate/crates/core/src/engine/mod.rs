//! Event-driven simulation of the Maki-Thompson dynamics with spontaneous
//! stifling, and an exact master-equation oracle for very small graphs.
//!
//! Each edge carries a rate-`lambda` contact clock. Active edges are the
//! ignorant-spreader, spreader-spreader and spreader-stifler pairs; the next
//! contact is drawn from their pooled rate and compared with the earliest
//! scheduled spontaneous stifling.

mod oracle;
mod replicas;
mod state;
mod trajectory;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::stifling::StiflingLaw;

pub use oracle::{exact_oracle, OracleResult, ORACLE_MAX_VERTICES};
pub use replicas::{run_replicas, run_replicas_with_jobs, ReplicaSet};
pub use state::{init_state, run, EventCounters, EventKind, SimState, Simulator, StepOutcome};
pub use trajectory::Trajectory;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VertexState {
    Ignorant,
    Spreader,
    Stifler,
}

impl VertexState {
    pub(crate) fn index(self) -> usize {
        match self {
            VertexState::Ignorant => 0,
            VertexState::Spreader => 1,
            VertexState::Stifler => 2,
        }
    }
}

/// What a spreader-spreader contact does.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum YyRule {
    /// Both spreaders become stiflers; both contact-stifling counters move.
    #[default]
    BothStifle,
    /// One endpoint, chosen uniformly, becomes a stifler.
    InitiatorOnly,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitialCondition {
    /// One state per vertex.
    Explicit(Vec<VertexState>),
    /// Per-type fractions `[x, y, z]` of each type class.
    Proportions(Vec<[f64; 3]>),
}

impl InitialCondition {
    /// Fraction `y` of every type starts as spreaders, the rest ignorant.
    pub fn spreaders(n_types: usize, y: f64) -> Self {
        Self::Proportions(vec![[1.0 - y, y, 0.0]; n_types])
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub lambda: f64,
    pub law: StiflingLaw,
    pub t_max: f64,
    pub grid_dt: f64,
    pub initial: InitialCondition,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub yy_rule: YyRule,
    /// Recount the active-edge categories after every event.
    #[serde(default)]
    pub debug_checks: bool,
}

impl SimConfig {
    /// Number of grid intervals, checking that `grid_dt` divides `t_max`.
    pub fn grid_steps(&self) -> Result<usize, EngineError> {
        if !(self.t_max.is_finite() && self.t_max >= 0.0) {
            return Err(EngineError::InvalidConfig(format!("t_max must be finite and non-negative, got {}", self.t_max)));
        }
        if !(self.grid_dt.is_finite() && self.grid_dt > 0.0) {
            return Err(EngineError::InvalidConfig(format!("grid_dt must be positive, got {}", self.grid_dt)));
        }
        let steps = (self.t_max / self.grid_dt).round();
        if (steps * self.grid_dt - self.t_max).abs() > 1e-9 * self.t_max.max(1.0) {
            return Err(EngineError::InvalidConfig(format!(
                "grid_dt {} does not divide t_max {}",
                self.grid_dt, self.t_max
            )));
        }
        Ok(steps as usize)
    }

    pub(crate) fn validate(&self, n_vertices: usize, n_types: usize) -> Result<usize, EngineError> {
        if !(self.lambda.is_finite() && self.lambda > 0.0) {
            return Err(EngineError::InvalidConfig(format!("lambda must be positive, got {}", self.lambda)));
        }
        self.law.validated().map_err(|e| EngineError::InvalidConfig(e.to_string()))?;
        match &self.initial {
            InitialCondition::Explicit(states) if states.len() != n_vertices => {
                return Err(EngineError::InvalidConfig(format!(
                    "explicit initial state has {} entries for {n_vertices} vertices",
                    states.len()
                )));
            }
            InitialCondition::Proportions(p) => {
                if p.len() != n_types {
                    return Err(EngineError::InvalidConfig(format!(
                        "initial proportions given for {} types, graph has {n_types}",
                        p.len()
                    )));
                }
                for (k, xyz) in p.iter().enumerate() {
                    if xyz.iter().any(|&v| !(v >= 0.0)) || (xyz.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
                        return Err(EngineError::InvalidConfig(format!(
                            "initial proportions for type {k} must be non-negative and sum to 1, got {xyz:?}"
                        )));
                    }
                }
            }
            InitialCondition::Explicit(_) => {}
        }
        self.grid_steps()
    }
}

#[derive(Debug, Error)]
pub enum EngineError {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("type {ty}: {spreaders} spreaders and {stiflers} stiflers exceed the {size} vertices of the type")]
    ProportionRoundingImpossible {
        ty: usize,
        size: usize,
        spreaders: usize,
        stiflers: usize,
    },
    #[error("exact oracle limited to {max} vertices, graph has {n}")]
    TooManyVertices { n: usize, max: usize },
    #[error("exact oracle needs a memoryless stifling law, got {0}")]
    NonExponentialLaw(StiflingLaw),
    #[error("oracle times must be non-negative and sorted")]
    InvalidTimes,
}
