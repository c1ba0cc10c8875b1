//! Configuration, initial conditions, the coupled time loop, checkpoints and
//! experiment suites.

pub mod checkpoint;
pub mod config;
pub mod experiments;
pub mod ic;
pub mod runner;

pub use checkpoint::Checkpoint;
pub use config::{IcSpec, RunConfig};
pub use runner::{advance, resume, run, RunSummary, Simulation};
