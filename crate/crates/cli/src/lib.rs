//! Experiment orchestration for the `dpgnn` command-line tool: manifests,
//! cell runs, aggregation and reports.

pub mod aggregate;
pub mod commands;
pub mod manifest;
pub mod output;
pub mod report;
pub mod run;

pub use manifest::Manifest;
pub use run::{run, RunSummary};
