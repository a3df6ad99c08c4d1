//! Scenario-driven batch runs of the exact and particle engines.
//!
//! A scenario is a strict TOML file naming a graph, a model, a partition
//! schedule, the engines to run and the Monte Carlo sizes. See
//! [`scenario::PRESETS`] for complete examples.

pub mod commands;
pub mod error;
pub mod runner;
pub mod scenario;

pub use error::{HarnessError, HarnessResult};
pub use runner::{run_scenario, RunResult};
pub use scenario::{load_scenario, preset, save_scenario, Scenario};
