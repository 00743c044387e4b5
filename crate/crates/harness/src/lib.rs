//! Experiment harness for the saddle-free Newton series optimiser: run
//! configuration, dataset ingestion, synthetic problems, training drivers and
//! structured result logging. The `sfn` binary is a thin CLI over this
//! library.

pub mod aggregate;
pub mod config;
pub mod dataset;
pub mod error;
pub mod experiment;
pub mod logging;
pub mod synth;

pub use config::RunConfig;
pub use error::{HarnessError, Result};
