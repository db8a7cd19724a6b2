//! Maki-Thompson rumor dynamics with spontaneous stifling on quasi-transitive
//! graphs.
//!
//! * [`qtgraph`] builds and checks typed graphs from neighbour-count blueprints.
//! * [`stifling`] holds the waiting-time laws for spontaneous stifling.
//! * [`engine`] is the exact event-driven simulator plus a master-equation
//!   oracle for tiny graphs.
//! * [`meanfield`] solves the deterministic integral system on a grid.
//! * [`fluctuations`] covers the Gaussian noise covariances, the linear
//!   fluctuation system and empirical fluctuation statistics.
//! * [`experiments`] wires these together into the reproducible checks the
//!   CLI and the acceptance suite run.

pub mod engine;
pub mod experiments;
pub mod fluctuations;
pub mod meanfield;
pub mod qtgraph;
pub mod stifling;
