//! Quasi-transitive graphs described by type blueprints: the built-in
//! families, a configuration-model realizer for arbitrary blueprints,
//! realization checks and the growth-margin function used for balls of
//! infinite graphs.

mod blueprint;
mod config_model;
mod families;
mod graph;
mod growth;
mod io;

use thiserror::Error;

pub use blueprint::{validate_blueprint, BlueprintFile, TypeBlueprint};
pub use config_model::{
    build_configuration_model, build_configuration_model_with_budget, feasible_type_sizes,
    DEFAULT_RESTART_BUDGET,
};
pub use families::{build_family, Family};
pub use graph::{verify_realization, Graph, RealizationFailure, RealizationReport};
pub use growth::{boundary_margin_g, GrowthTable};
pub use io::{edges_to_csv, graph_from_files, types_to_json};

#[derive(Debug, Error)]
pub enum GraphError {
    #[error("blueprint has no types")]
    EmptyBlueprint,
    #[error("blueprint is not square: {rows} rows but row {row} has {len} entries")]
    NotSquare { rows: usize, row: usize, len: usize },
    #[error("neighbour counts between types {i} and {j} admit no proportion vector")]
    InconsistentCounts { i: usize, j: usize },
    #[error("type graph is disconnected: type {unreachable} is not reachable from type 0")]
    DisconnectedTypes { unreachable: usize },
    #[error("type {ty} has no neighbours")]
    ZeroDegreeType { ty: usize },
    #[error("{what} must be at least {min}, got {got}")]
    SizeTooSmall { what: &'static str, min: usize, got: usize },
    #[error("decorated grid needs even dimensions, got {m} x {n}")]
    OddGridDimension { m: usize, n: usize },
    #[error("size {size} cannot realize the blueprint: {reason}")]
    InfeasibleSize { size: usize, reason: String },
    #[error("half-edge matching failed after {budget} restarts")]
    MatchingFailed { budget: usize },
    #[error("self-loop at vertex {vertex}")]
    SelfLoop { vertex: usize },
    #[error("repeated edge {u}-{v}")]
    MultiEdge { u: usize, v: usize },
    #[error("vertex {vertex} out of range for {n} vertices")]
    VertexOutOfRange { vertex: usize, n: usize },
    #[error("vertex {vertex} has type {ty}, outside the blueprint")]
    TypeOutOfRange { vertex: usize, ty: usize },
    #[error("growth table too short: need index {needed}, table ends at {available}")]
    TableTooShort { needed: usize, available: usize },
    #[error("invalid growth table: {0}")]
    InvalidGrowth(String),
    #[error("parse error: {0}")]
    Parse(String),
}
