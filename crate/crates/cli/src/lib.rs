//! Batch experiment harness over the linsysid library: JSON-configured
//! simulate/identify/analyze pipelines, bundled example reruns with pass/fail
//! checks, and tolerance-aware report comparison.

pub mod config;
pub mod diff;
pub mod error;
pub mod report;
pub mod repro;
pub mod run;
pub mod signals;

pub use error::{CliError, Result};
