//! Config-driven experiments over the fvlab solvers: canned scenarios,
//! refinement and stability studies, and long-format CSV output.

#![allow(clippy::needless_range_loop, clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod csv;
pub mod error;
pub mod random;
pub mod run;
pub mod scenarios;
pub mod studies;

pub use config::{ExperimentConfig, Scenario};
pub use error::HarnessError;
pub use run::{execute, run, Outputs, Overrides};
