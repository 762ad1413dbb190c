//! Batch front end for the panelcast pipeline.
//!
//! Commands run in order `rank`, `tune`, `train`, `evaluate`, `forecast`,
//! `report`; `all` runs them back to back. Later commands read what earlier
//! ones wrote under the output directory. Every command also writes
//! `manifests/<command>.json` with the hashes of its inputs and outputs.

pub mod config;
pub mod error;
pub mod fixture;
pub mod output;
pub mod pipeline;
pub mod svg;

pub use error::CliError;
pub use pipeline::{Command, Pipeline};
