//! Experiment runner, file formats and command-line front end for
//! [`stratloop_core`].
//!
//! - [`config`]: the JSON experiment document and its validation.
//! - [`builtins`]: named configurations for the standard experiments.
//! - [`ingest`]: CSV datasets to fitted populations.
//! - [`synth`]: schema-compatible synthetic stand-ins for the datasets.
//! - [`runner`]: parallel trials, CSV traces and the JSON summary.

pub mod builtins;
pub mod config;
pub mod ingest;
pub mod runner;
pub mod synth;

pub use config::ExperimentConfig;
pub use runner::{run_experiment, RunOutput};
pub use stratloop_core as core;
